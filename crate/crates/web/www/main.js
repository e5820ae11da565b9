import init, { forecast_sine, smtf_table, simulate_scaling } from "./pkg/esdnn_web.js";

const $ = (id) => document.getElementById(id);

function fail(el, e) {
  el.textContent = String(e);
  el.className = "err";
}

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const span = hi - lo || 1;
  const n = Math.max(...series.map((s) => s.values.length));
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, i) => {
      const x = (i / Math.max(n - 1, 1)) * (w - 20) + 10;
      const y = h - 10 - ((v - lo) / span) * (h - 20);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, 14, 14 + 12 * k);
  });
}

function runForecast() {
  const info = $("f-info");
  info.className = "";
  info.textContent = "training...";
  // Let the status paint before the synchronous training run.
  setTimeout(() => {
    try {
      const f = JSON.parse(forecast_sine(
        $("f-kind").value, +$("f-len").value, +$("f-noise").value,
        +$("f-epochs").value, BigInt($("f-seed").value)));
      const mse = f.val_mse[f.val_mse.length - 1];
      info.textContent = `validation MSE (normalized) after ${f.val_mse.length} epochs: ${mse.toExponential(3)}`;
      plot($("f-plot"), [
        { label: "actual", color: "#333", values: f.actual },
        { label: "predicted", color: "#d33", values: f.predicted },
      ]);
    } catch (e) {
      fail(info, e);
    }
  }, 10);
}

function runTable() {
  const out = $("t-out");
  out.className = "";
  try {
    out.textContent = smtf_table($("t-series").value, +$("t-window").value, $("t-cov").checked);
  } catch (e) {
    fail(out, e);
  }
}

function runScaling() {
  const info = $("s-info");
  info.className = "";
  try {
    const v = JSON.parse(simulate_scaling($("s-actual").value, $("s-pred").value, $("s-scenario").value, +$("s-thr").value));
    info.textContent = v.ratio_mean === null
      ? "no interval had a nonzero baseline"
      : `mean M_pred / M_base: ${v.ratio_mean.toFixed(3)}`;
    plot($("s-plot"), [
      { label: "moving-average baseline", color: "#36c", values: v.m_base },
      { label: "predictive", color: "#d33", values: v.m_pred },
    ]);
  } catch (e) {
    fail(info, e);
  }
}

await init();
$("f-run").onclick = runForecast;
$("t-run").onclick = runTable;
$("s-run").onclick = runScaling;
runTable();
runScaling();
