// Expects the wasm-bindgen output for bioeq-web in ./pkg (see README).
import init, { curve, rejection_scatter, crossover_vs_chow } from "./pkg/bioeq_web.js";

const num = (id) => Number(document.getElementById(id).value);
const el = (id) => document.getElementById(id);

function design() {
  return [num("mu"), num("s1"), num("s2"), num("dl"), num("du"), num("alpha")];
}

function show(outId, plotId, fn) {
  try {
    fn();
  } catch (e) {
    el(outId).innerHTML = `<span class="err">${e}</span>`;
    el(plotId).innerHTML = "";
  }
}

function runCurve() {
  show("curve-out", "curve-plot", () => {
    const r = JSON.parse(curve(...design(), num("q"), num("target"), num("m-curve"), num("seed")));
    el("curve-out").textContent =
      `n1 = ${r.rec_n1}, n2 = ${r.rec_n2} (n* = ${r.n_star.toFixed(3)}, ` +
      `power ${r.power_at_rec.toFixed(4)}, censored ${r.censored}, reinitializations ${r.reinitializations})`;
    el("curve-plot").innerHTML = r.svg;
  });
}

function runScatter() {
  const n = num("n-scatter");
  el("n-scatter-value").textContent = n;
  show("scatter-out", "scatter-plot", () => {
    const r = JSON.parse(rejection_scatter(...design(), n, 1024, num("seed")));
    el("scatter-out").textContent = `power at n1 = n2 = ${n}: ${r.power.toFixed(4)} (1024 points)`;
    el("scatter-plot").innerHTML = r.svg;
  });
}

function runCrossover() {
  show("crossover-out", "crossover-plot", () => {
    const r = JSON.parse(
      crossover_vs_chow(num("f"), num("sd"), num("cdl"), num("cdu"), num("alpha"), num("target"), 1024, num("seed")),
    );
    el("crossover-out").textContent = `per sequence: ${r.n} from the power curve, ${r.chow_n} from Chow's formula`;
    el("crossover-plot").innerHTML = r.svg;
  });
}

await init();
el("run-curve").addEventListener("click", runCurve);
el("n-scatter").addEventListener("input", runScatter);
el("run-crossover").addEventListener("click", runCrossover);
el("design").addEventListener("change", () => {
  runCurve();
  runScatter();
});
runCurve();
runScatter();
runCrossover();
