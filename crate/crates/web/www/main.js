import init, { payload_scores, soft_mask, guided_altitudes } from "./pkg/airchunk_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function updateScores() {
  const commands = new Float64Array(["u0", "u1", "u2", "u3"].map(num));
  const g = num("aperture");
  $("aperture-v").textContent = g.toFixed(2);
  const s = payload_scores(commands, g);
  const names = ["c_intent", "o_intent", "c_meas", "o_meas", "o_flag", "alpha"];
  $("scores").innerHTML = names.map((n, i) => `<tr><td>${n}</td><td>${s[i].toFixed(3)}</td></tr>`).join("");
}

function updateMask() {
  const canvas = $("mask");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let w;
  try {
    w = soft_mask(num("h"), num("b"), num("decay"));
    $("mask-err").textContent = "";
  } catch (e) {
    $("mask-err").textContent = e;
    return;
  }
  const bw = canvas.width / w.length;
  const b = num("b");
  w.forEach((v, t) => {
    ctx.fillStyle = t < b ? "#c33" : "#06c";
    const hgt = v * (canvas.height - 10);
    ctx.fillRect(t * bw + 1, canvas.height - hgt, bw - 2, hgt);
  });
}

function updateAltitudes() {
  const canvas = $("alt");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const h = 25;
  let v;
  try {
    v = guided_altitudes(h, num("lambda"), num("s0"), $("holding").checked, num("seed"));
    $("alt-err").textContent = "";
  } catch (e) {
    $("alt-err").textContent = e;
    return;
  }
  const lo = Math.min(-0.25, ...v), hi = Math.max(0.25, ...v);
  const x = (t) => 20 + (t / (h - 1)) * (canvas.width - 40);
  const y = (z) => canvas.height - 10 - ((z - lo) / (hi - lo)) * (canvas.height - 20);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(x(0), y(0));
  ctx.lineTo(x(h - 1), y(0));
  ctx.stroke();
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(x(0), y(0.15));
  ctx.lineTo(x(h - 1), y(0.15));
  ctx.stroke();
  ctx.setLineDash([]);
  for (const [offset, color] of [[0, "#888"], [h, "#06c"]]) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    for (let t = 0; t < h; t++) {
      const px = x(t), py = y(v[offset + t]);
      t === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    }
    ctx.stroke();
  }
}

await init();
for (const id of ["u0", "u1", "u2", "u3", "aperture"]) $(id).addEventListener("input", updateScores);
for (const id of ["h", "b", "decay"]) $(id).addEventListener("input", updateMask);
for (const id of ["s0", "lambda", "seed", "holding"]) $(id).addEventListener("input", updateAltitudes);
updateScores();
updateMask();
updateAltitudes();
