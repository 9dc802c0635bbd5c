/**
 * Entry point: serve a saved linear model over stdio.
 *
 *   node dist/serve_linear.js path/to/model.json
 *
 * The harness points an adapter model at exactly this command line.
 */

import { gradient, loadLinearModel, predict } from "./linear.js";
import { serve } from "./server.js";

const path = process.argv[2];
if (!path) {
  console.error("usage: serve_linear <model.json>");
  process.exit(2);
}

const model = loadLinearModel(path);
console.error(
  `[serve_linear] ${model.modelId}: ${model.task}, ` +
    `input_len=${model.inputLen}, n_outputs=${model.nOutputs}`,
);

serve({
  task: model.task,
  inputLen: model.inputLen,
  nOutputs: model.nOutputs,
  predictor: (batch) => predict(model, batch),
  gradient: (batch, c) => gradient(model, batch, c),
}).then((code) => process.exit(code));
