import init, { fast_reaction, newton_vs_game, reconstruct } from "./pkg/evogame_web.js";

const $ = (id) => document.getElementById(id);
const pow10 = (id) => Math.pow(10, parseFloat($(id).value));

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-9) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + (x - x0) / (x1 - x0 || 1) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - (y - y0) / (y1 - y0) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText(y1.toFixed(2), 2, pad + 4);
  ctx.fillText(y0.toFixed(2), 2, canvas.height - pad);
  ctx.fillText(x0.toFixed(2), pad, canvas.height - 10);
  ctx.fillText(x1.toFixed(2), canvas.width - pad - 24, canvas.height - 10);
  return { ctx, sx, sy };
}

function guarded(errId, draw) {
  return () => {
    try {
      $(errId).textContent = "";
      draw();
    } catch (e) {
      $(errId).textContent = String(e);
    }
  };
}

const drawFastReaction = guarded("fr-err", () => {
  const n = parseInt($("fr-n").value), eps = pow10("fr-eps");
  $("fr-n-o").value = n;
  $("fr-eps-o").value = eps.toFixed(3);
  const d = JSON.parse(fast_reaction(n, eps, 100, BigInt($("fr-seed").value || 0)));
  const { ctx, sx, sy } = frame($("fr-c"), d.t, d.x.flat());
  ctx.lineWidth = 2;
  for (let j = 0; j < n; j++) {
    for (let i = 1; i < d.t.length; i++) {
      const p = d.right[i][j];
      ctx.strokeStyle = `rgb(${Math.round(255 * (1 - p))}, 60, ${Math.round(255 * p)})`;
      ctx.beginPath();
      ctx.moveTo(sx(d.t[i - 1]), sy(d.x[i - 1][j]));
      ctx.lineTo(sx(d.t[i]), sy(d.x[i][j]));
      ctx.stroke();
    }
  }
});

const drawNewton = guarded("nw-err", () => {
  const eps = pow10("nw-eps");
  $("nw-eps-o").value = eps.toFixed(4);
  const d = JSON.parse(newton_vs_game(4, eps, BigInt($("nw-seed").value || 0)));
  $("nw-gap").value = Math.max(...d.gap).toExponential(2);
  const all = d.newton.x.flat().concat(d.game.x.flat());
  const { ctx, sx, sy } = frame($("nw-c"), d.newton.t, all);
  const colours = ["#c33", "#36c", "#393", "#c90"];
  for (const [paths, dash] of [[d.newton, []], [d.game, [6, 4]]]) {
    ctx.setLineDash(dash);
    paths.x[0].forEach((_, j) => {
      ctx.strokeStyle = colours[j % colours.length];
      ctx.beginPath();
      paths.t.forEach((t, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, sx(t), sy(paths.x[i][j])));
      ctx.stroke();
    });
  }
  ctx.setLineDash([]);
});

const drawReconstruct = guarded("rc-err", () => {
  const v = parseFloat($("rc-v").value), eps = pow10("rc-eps"), k = parseInt($("rc-k").value);
  $("rc-v-o").value = v.toFixed(3);
  $("rc-eps-o").value = eps.toFixed(3);
  $("rc-k-o").value = k;
  const canvas = $("rc-c");
  canvas.getContext("2d").clearRect(0, 0, canvas.width, canvas.height);
  const d = JSON.parse(reconstruct(v, eps, k));
  const { ctx, sx, sy } = frame(canvas, [-1.1, 1.1], [0, ...d.sigma]);
  const w = Math.max(4, (sx(1) - sx(-1)) / (2 * k));
  ctx.fillStyle = d.near_boundary ? "#c60" : "#36c";
  d.u.forEach((u, i) => ctx.fillRect(sx(u) - w / 2, sy(d.sigma[i]), w, sy(0) - sy(d.sigma[i])));
  ctx.strokeStyle = "#c33";
  ctx.beginPath();
  ctx.moveTo(sx(v), sy(0));
  ctx.lineTo(sx(v), 30);
  ctx.stroke();
});

await init();
for (const id of ["fr-n", "fr-eps", "fr-seed"]) $(id).addEventListener("input", drawFastReaction);
for (const id of ["nw-eps", "nw-seed"]) $(id).addEventListener("input", drawNewton);
for (const id of ["rc-v", "rc-eps", "rc-k"]) $(id).addEventListener("input", drawReconstruct);
drawFastReaction();
drawNewton();
drawReconstruct();
