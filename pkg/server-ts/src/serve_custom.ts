/**
 * Skeleton for serving your own model.
 *
 *   node dist/serve_custom.js
 *
 * Replace the predictor below with a call into whatever actually runs your
 * network (an ONNX session, a tfjs model, a subprocess around a Python
 * framework...). Keep the contract: classification answers are probability
 * rows summing to 1, regression answers are raw outputs, and the optional
 * gradient callable returns d logit_c / dx. Drop the gradient field if you
 * cannot provide it; the harness then skips gradient-based methods.
 *
 * The placeholder below is a fixed softmax over two hand-written features,
 * just so the file runs end to end. It is a stand-in, not a reference.
 */

import { serve } from "./server.js";

const INPUT_LEN = 30;

function features(x: number[]): [number, number] {
  // energy in the first half vs the second half of the series
  const mid = Math.floor(x.length / 2);
  let a = 0;
  let b = 0;
  for (let i = 0; i < x.length; i++) {
    if (i < mid) a += x[i] * x[i];
    else b += x[i] * x[i];
  }
  return [a / mid, b / (x.length - mid)];
}

serve({
  task: "classification",
  inputLen: INPUT_LEN,
  nOutputs: 2,
  // swap this out for your framework call; batch in, rows of outputs back
  predictor: (batch) =>
    batch.map((x) => {
      const [a, b] = features(x);
      const ea = Math.exp(a - Math.max(a, b));
      const eb = Math.exp(b - Math.max(a, b));
      return [ea / (ea + eb), eb / (ea + eb)];
    }),
  // no gradient: this placeholder is not differentiable in closed form
}).then((code) => process.exit(code));
