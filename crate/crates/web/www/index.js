import init, { decision_map, shapley_comparison, tsne_blobs } from "./pkg/shapdbm_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

function status(text) {
  $("status").textContent = text;
}

// Let the browser paint the status line before blocking on wasm work.
const nextFrame = () => new Promise((r) => setTimeout(r, 20));

function paint(canvas, view) {
  const w = view.width;
  canvas.width = w;
  canvas.height = w;
  const img = new ImageData(new Uint8ClampedArray(view.rgba), w, w);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

async function renderMaps() {
  const kind = $("map-kind").value;
  const seed = Number($("map-seed").value) >>> 0;
  const res = Number($("map-res").value);
  try {
    for (const [shap, canvas, out] of [[false, "map-data", "ma-data"], [true, "map-shap", "ma-shap"]]) {
      status(`rendering ${shap ? "Shapley" : "data"}-space map…`);
      await nextFrame();
      const t0 = performance.now();
      const view = decision_map(kind, shap, seed, res);
      paint($(canvas), view);
      $(out).textContent = view.accuracy.toFixed(3);
      status(`done in ${((performance.now() - t0) / 1000).toFixed(1)} s`);
      view.free();
    }
  } catch (e) {
    status(String(e));
  }
}

function renderShapley() {
  const perms = Number($("shap-perms").value);
  $("shap-perms-v").textContent = perms;
  const v = shapley_comparison(Number($("shap-seed").value) >>> 0, perms);
  const exact = v.exact, mc = v.estimate;
  const scale = 150 / Math.max(1e-9, ...exact.map(Math.abs), ...mc.map(Math.abs));
  const bar = (x, cls) => `<span class="bar ${cls}" style="width:${Math.abs(x) * scale}px"></span>`;
  let rows = "<tr><th>feature</th><th>exact</th><th>sampled</th><th></th></tr>";
  exact.forEach((e, k) => {
    rows += `<tr><td>${k}</td><td>${e.toFixed(4)}</td><td>${mc[k].toFixed(4)}</td>` +
      `<td style="text-align:left">${bar(e, "")}<br>${bar(mc[k], "mc")}</td></tr>`;
  });
  $("shap-table").innerHTML = rows;
  const mae = exact.reduce((s, e, k) => s + Math.abs(e - mc[k]), 0) / exact.length;
  const sum = exact.reduce((s, e) => s + e, 0);
  $("shap-sum").textContent =
    `base ${v.base.toFixed(4)} + Σφ ${sum.toFixed(4)} = ${(v.base + sum).toFixed(4)}; ` +
    `model output ${v.output.toFixed(4)}; mean |exact − sampled| ${mae.toFixed(5)}`;
  v.free();
}

function renderTsne() {
  const perp = Number($("tsne-perp").value);
  $("tsne-perp-v").textContent = perp;
  const data = tsne_blobs(perp, Number($("tsne-seed").value) >>> 0);
  const canvas = $("tsne");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let xs = [], ys = [];
  for (let i = 0; i < data.length; i += 3) { xs.push(data[i]); ys.push(data[i + 1]); }
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const sx = (x) => 10 + (280 * (x - x0)) / (x1 - x0 || 1);
  const sy = (y) => 290 - (280 * (y - y0)) / (y1 - y0 || 1);
  for (let i = 0; i < data.length; i += 3) {
    ctx.fillStyle = COLORS[data[i + 2]];
    ctx.fillRect(sx(data[i]) - 2, sy(data[i + 1]) - 2, 5, 5);
  }
}

await init();
status("ready");
$("map-go").onclick = renderMaps;
$("shap-perms").oninput = renderShapley;
$("shap-seed").onchange = renderShapley;
$("tsne-perp").onchange = renderTsne;
$("tsne-seed").onchange = renderTsne;
renderShapley();
renderTsne();
