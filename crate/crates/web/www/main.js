// Build with:
//   cargo build -p neurofield-web --release --target wasm32-unknown-unknown
//   wasm-bindgen --target web --out-dir www/pkg target/wasm32-unknown-unknown/release/neurofield_web.wasm
import init, { simulate_path, noise_covariance, solve_rho } from "./pkg/neurofield_web.js";

const num = (id) => parseFloat(document.getElementById(id).value);
const val = (id) => document.getElementById(id).value;

function heatmap(canvas, data, rows, cols) {
  const ctx = canvas.getContext("2d");
  let lo = Infinity, hi = -Infinity;
  for (const v of data) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const span = hi - lo || 1;
  const img = ctx.createImageData(cols, rows);
  for (let i = 0; i < data.length; i++) {
    const t = (data[i] - lo) / span;
    img.data[4 * i] = 255 * t;
    img.data[4 * i + 1] = 80;
    img.data[4 * i + 2] = 255 * (1 - t);
    img.data[4 * i + 3] = 255;
  }
  const off = new OffscreenCanvas(cols, rows);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const all = series.flatMap((s) => Array.from(s.ys));
  const lo = Math.min(0, ...all), hi = Math.max(...all);
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => ((x - x0) / (x1 - x0 || 1)) * (canvas.width - 20) + 10;
  const py = (y) => canvas.height - 10 - ((y - lo) / (hi - lo || 1)) * (canvas.height - 20);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  }
}

function runPath() {
  const n = 128;
  const f = simulate_path(n, 10, num("exc"), num("inh"), num("slope"), num("sigma"), 0.5, num("tend"), num("seed"));
  heatmap(document.getElementById("heat"), f.data, f.times.length, n);
}

function runCov() {
  const c = noise_covariance(256, 8, val("phi"), num("size"), num("draws"), 48, 1);
  plot(document.getElementById("cov"), c.lags, [
    { ys: c.empirical, color: "black" },
    { ys: c.analytic, color: "red" },
  ]);
}

function runRho() {
  const r = solve_rho(256, 10, val("kernel"), num("scale"), num("kinh"));
  plot(document.getElementById("rho"), r.coords, [
    { ys: r.power, color: "black" },
    { ys: r.fourier, color: "red" },
  ]);
  document.getElementById("rho-out").textContent =
    `power: lambda = ${r.power_lambda.toFixed(8)} (residual ${r.power_residual.toExponential(2)}), ` +
    `fourier: Lambda = ${r.fourier_lambda.toFixed(8)}; black power, red fourier`;
}

await init();
for (const [id, fn] of [["run-path", runPath], ["run-cov", runCov], ["run-rho", runRho]]) {
  document.getElementById(id).addEventListener("click", () => {
    try { fn(); } catch (e) { alert(e); }
  });
}
runPath();
runCov();
runRho();
