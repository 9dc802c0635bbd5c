/**
 * The request loop: wraps any ServedModel behind the stdio wire protocol.
 *
 * Single-threaded, one frame at a time, matching the client's
 * one-outstanding-request contract. Malformed frames and predictor
 * exceptions become error frames; the loop keeps serving afterwards.
 * The loop only ends on a shutdown frame (resolves 0) or EOF.
 */

import readline from "node:readline";

import {
  Capability,
  PROTOCOL_VERSION,
  errorFrame,
  frameId,
  isFiniteMatrix,
  parseBatch,
  writeFrame,
} from "./protocol.js";

export interface ServedModel {
  task: string;
  inputLen: number;
  nOutputs: number;
  predictor: (batch: number[][]) => number[][];
  gradient?: (batch: number[][], outputIndex: number) => number[][];
}

export function capabilities(model: ServedModel): Capability[] {
  return model.gradient ? ["predict", "gradient"] : ["predict"];
}

export async function serve(
  model: ServedModel,
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout,
): Promise<number> {
  const rl = readline.createInterface({
    input,
    crlfDelay: Number.POSITIVE_INFINITY,
  });

  for await (const raw of rl) {
    const line = String(raw).trim();
    if (!line) continue;

    let frame: unknown;
    try {
      frame = JSON.parse(line);
    } catch {
      writeFrame(output, errorFrame(null, "malformed frame: not valid JSON"));
      continue;
    }
    const id = frameId(frame);
    const req = frame as { op?: unknown; [k: string]: unknown };

    try {
      switch (req.op) {
        case "shutdown":
          rl.close();
          return 0;

        case "info":
          writeFrame(output, {
            id,
            protocol: PROTOCOL_VERSION,
            task: model.task,
            input_len: model.inputLen,
            n_outputs: model.nOutputs,
            capabilities: capabilities(model),
          });
          break;

        case "predict": {
          const batch = parseBatch(req.inputs, model.inputLen);
          const outputs = model.predictor(batch);
          if (!isFiniteMatrix(outputs, model.nOutputs)) {
            throw new Error("predictor returned a malformed output matrix");
          }
          writeFrame(output, { id, outputs });
          break;
        }

        case "gradient": {
          if (!model.gradient) {
            throw new Error("this server does not serve gradients");
          }
          const batch = parseBatch(req.inputs, model.inputLen);
          const gradients = model.gradient(batch, req.output_index as number);
          if (!isFiniteMatrix(gradients, model.inputLen)) {
            throw new Error("gradient returned a malformed matrix");
          }
          writeFrame(output, { id, gradients });
          break;
        }

        default:
          throw new Error(`unknown op ${JSON.stringify(req.op)}`);
      }
    } catch (err) {
      writeFrame(output, errorFrame(id, String(err)));
    }
  }
  return 0; // EOF without shutdown: treated as an orderly close
}
