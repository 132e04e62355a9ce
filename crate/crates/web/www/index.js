import init, { simulate, compare, trainingImpulse } from "./pkg/fitgoal_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

const SERIES = [
  ["intensity", "#1f77b4"],
  ["base", "#2ca02c"],
  ["performance", "#d62728"],
];

function draw(t) {
  const c = $("plot");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const n = t.day.length;
  const pad = 30;
  const x = (i) => pad + (i / (n - 1)) * (c.width - 2 * pad);
  SERIES.forEach(([key, color], k) => {
    const v = t[key];
    const lo = Math.min(...v);
    const hi = Math.max(...v);
    const y = (u) => c.height - pad - ((u - lo) / (hi - lo || 1)) * (c.height - 2 * pad);
    ctx.strokeStyle = color;
    ctx.beginPath();
    v.forEach((u, i) => (i ? ctx.lineTo(x(i), y(u)) : ctx.moveTo(x(i), y(u))));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(`${key} [${lo.toFixed(2)}, ${hi.toFixed(2)}]`, pad + k * 200, 14);
  });
}

function fail(el, e) {
  el.innerHTML = `<span class="err">${e}</span>`;
}

function runEpisode() {
  try {
    const t = JSON.parse(simulate($("env").value, $("stage").value, $("strategy").value, num("rho"), num("sigma"), num("seed")));
    $("total").textContent = `total reward ${t.total.toFixed(2)}`;
    draw(t);
  } catch (e) {
    fail($("total"), e);
  }
}

function runCompare() {
  try {
    const rows = JSON.parse(compare($("env").value, $("stage").value, num("rho"), num("sigma"), num("reps"), num("seed")));
    $("table").innerHTML =
      "<tr><th>strategy</th><th>mean</th><th>sd</th></tr>" +
      rows.map((r) => `<tr><td>${r.strategy}</td><td>${r.mean.toFixed(2)}</td><td>${r.sd.toFixed(2)}</td></tr>`).join("");
  } catch (e) {
    fail($("table"), e);
  }
}

function runTrimp() {
  try {
    const r = JSON.parse(trainingImpulse(num("dur"), num("avg"), num("rest"), num("max"), $("sex").value));
    $("trimpOut").textContent = `TRIMP ${r.trimp.toFixed(1)}`;
  } catch (e) {
    fail($("trimpOut"), e);
  }
}

await init();
$("run").onclick = runEpisode;
$("cmp").onclick = runCompare;
$("trimp").onclick = runTrimp;
runEpisode();
