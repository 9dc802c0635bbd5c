/**
 * Closed-form linear demo model.
 *
 * Loads the harness's serialized model format ("tsabench-model" JSON with
 * params [W, b]) and answers predictions as softmax(W x + b) and gradients
 * as the weight row of the requested output. No framework needed, which is
 * what makes it usable for exact equivalence tests against the in-process
 * linear model.
 */

import { readFileSync } from "node:fs";

export interface LinearModel {
  task: string;
  inputLen: number;
  nOutputs: number;
  modelId: string;
  W: number[][]; // (nOutputs, inputLen)
  b: number[]; // (nOutputs,)
}

export function loadLinearModel(path: string): LinearModel {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  if (doc.format !== "tsabench-model" || doc.version !== 1) {
    throw new Error(`${path} is not a tsabench-model v1 file`);
  }
  if (doc.config?.kind !== "linear") {
    throw new Error(
      `only linear models are supported here, got kind ${doc.config?.kind}`,
    );
  }
  const [W, b] = doc.params as [number[][], number[]];
  const inputLen = doc.input_len as number;
  const nOutputs = doc.n_outputs as number;
  if (
    !Array.isArray(W) ||
    W.length !== nOutputs ||
    !W.every((row) => Array.isArray(row) && row.length === inputLen) ||
    !Array.isArray(b) ||
    b.length !== nOutputs
  ) {
    throw new Error(`${path}: params do not match declared shape`);
  }
  return {
    task: doc.task,
    inputLen,
    nOutputs,
    modelId: doc.model_id ?? "model0",
    W,
    b,
  };
}

function logits(model: LinearModel, x: number[]): number[] {
  return model.W.map((row, c) => {
    let z = model.b[c];
    for (let i = 0; i < row.length; i++) z += row[i] * x[i];
    return z;
  });
}

function softmax(z: number[]): number[] {
  const m = Math.max(...z);
  const e = z.map((v) => Math.exp(v - m));
  const s = e.reduce((a, v) => a + v, 0);
  return e.map((v) => v / s);
}

/** Probabilities for classification, raw outputs for regression. */
export function predict(model: LinearModel, batch: number[][]): number[][] {
  return batch.map((x) => {
    const z = logits(model, x);
    return model.task === "classification" ? softmax(z) : z;
  });
}

/** d logit_c / dx is the weight row c, independent of the input. */
export function gradient(
  model: LinearModel,
  batch: number[][],
  outputIndex: number,
): number[][] {
  if (
    !Number.isInteger(outputIndex) ||
    outputIndex < 0 ||
    outputIndex >= model.nOutputs
  ) {
    throw new Error(`output_index ${outputIndex} out of range`);
  }
  return batch.map(() => model.W[outputIndex].slice());
}
