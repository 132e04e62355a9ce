//! Text checkpoint format.
//!
//! ```text
//! fitgoal-net 1
//! arch hybrid hidden=32 dense=64
//! input 6 window 7 actions 10
//! tensor lstm.w_x 128 6
//! <row-major values, one per line, as hex IEEE-754 bit patterns>
//! ...
//! end
//! ```
//!
//! Values are stored as raw bit patterns so a reload is bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Architecture, NetParams, NetSpec};

const MAGIC: &str = "fitgoal-net";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(params: &NetParams, mut out: W) -> std::io::Result<()> {
    let spec = params.spec();
    writeln!(out, "{MAGIC} {VERSION}")?;
    match spec.arch {
        Architecture::Hybrid { hidden, dense } => writeln!(out, "arch hybrid hidden={hidden} dense={dense}")?,
        Architecture::LstmOnly { hidden } => writeln!(out, "arch lstm hidden={hidden}")?,
        Architecture::Mlp { hidden } => writeln!(out, "arch mlp hidden={hidden}")?,
    }
    writeln!(out, "input {} window {} actions {}", spec.input, spec.window, spec.actions)?;
    for seg in &spec.layout().segments {
        writeln!(out, "tensor {} {} {}", seg.name, seg.rows, seg.cols)?;
        for v in &params.as_slice()[seg.range()] {
            writeln!(out, "{:016x}", v.to_bits())?;
        }
    }
    writeln!(out, "end")
}

pub fn save_checkpoint(params: &NetParams, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<NetParams> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file, path)
}

pub fn read_checkpoint<R: Read>(input: R, path: &Path) -> Result<NetParams> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(line))) => Ok((i + 1, line)),
            Some((i, Err(e))) => Err(parse_err(path, i + 1, format!("read failed: {e}"))),
            None => Err(parse_err(path, 0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (n, header) = next("header")?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(parse_err(path, n, format!("unsupported header {header:?}")));
    }

    let (n, arch_line) = next("arch line")?;
    let words: Vec<&str> = arch_line.split_whitespace().collect();
    let kv = |key: &str| -> Result<usize> {
        words
            .iter()
            .find_map(|w| w.strip_prefix(&format!("{key}=")))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(path, n, format!("missing {key}= in {arch_line:?}")))
    };
    let arch = match words.get(..2) {
        Some(["arch", "hybrid"]) => Architecture::Hybrid {
            hidden: kv("hidden")?,
            dense: kv("dense")?,
        },
        Some(["arch", "lstm"]) => Architecture::LstmOnly { hidden: kv("hidden")? },
        Some(["arch", "mlp"]) => Architecture::Mlp { hidden: kv("hidden")? },
        _ => return Err(parse_err(path, n, format!("bad arch line {arch_line:?}"))),
    };

    let (n, dims) = next("dimension line")?;
    let d: Vec<&str> = dims.split_whitespace().collect();
    let spec = match d.as_slice() {
        ["input", i, "window", w, "actions", a] => {
            let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(path, n, e.to_string()));
            NetSpec {
                arch,
                input: num(i)?,
                window: num(w)?,
                actions: num(a)?,
            }
        }
        _ => return Err(parse_err(path, n, format!("bad dimension line {dims:?}"))),
    };

    let layout = spec.layout();
    let mut data = Vec::with_capacity(layout.len());
    for seg in &layout.segments {
        let (n, line) = next("tensor header")?;
        let want = format!("tensor {} {} {}", seg.name, seg.rows, seg.cols);
        if line != want {
            return Err(parse_err(path, n, format!("expected {want:?}, found {line:?}")));
        }
        for _ in 0..seg.len() {
            let (n, v) = next("tensor value")?;
            let bits = u64::from_str_radix(v.trim(), 16)
                .map_err(|e| parse_err(path, n, format!("bad value {v:?}: {e}")))?;
            data.push(f64::from_bits(bits));
        }
    }
    let (n, end) = next("end marker")?;
    if end != "end" {
        return Err(parse_err(path, n, format!("expected end marker, found {end:?}")));
    }
    NetParams::from_vec(spec, data)
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn roundtrip_is_bit_exact(seed in any::<u64>(), which in 0usize..3, scale in -1e6..1e6f64) {
            let arch = [
                Architecture::Hybrid { hidden: 3, dense: 4 },
                Architecture::LstmOnly { hidden: 5 },
                Architecture::Mlp { hidden: 6 },
            ][which];
            let mut p = NetParams::init(NetSpec::new(arch), seed);
            p.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            let mut buf = Vec::new();
            write_checkpoint(&p, &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.spec(), p.spec());
            prop_assert!(back.as_slice().iter().zip(p.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let p = NetParams::init(NetSpec::new(Architecture::Hybrid { hidden: 2, dense: 2 }), 1);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(cut.as_bytes(), Path::new("mem")).is_err());
        let bad = text.replacen("fitgoal-net 1", "fitgoal-net 9", 1);
        assert!(matches!(read_checkpoint(bad.as_bytes(), Path::new("mem")), Err(Error::Parse { line: 1, .. })));
    }
}
