#!/usr/bin/env node
/**
 * plots convergence --x rounds|seconds --out fig.svg run1.csv [run2.csv ...]
 * plots inner-cost --out fig.svg run.csv
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { MetricsError } from "./metrics.js";
import { plotConvergence, plotInnerCost, XAxis } from "./figures.js";

export async function main(argv: string[]): Promise<number> {
  try {
    await yargs(argv)
      .scriptName("plots")
      .command(
        "convergence <files..>",
        "objective-gap curves from one or more metrics CSVs",
        (y) =>
          y
            .positional("files", { type: "string", array: true, demandOption: true })
            .option("x", {
              choices: ["rounds", "seconds"] as const,
              default: "rounds" as XAxis,
            })
            .option("out", { type: "string", demandOption: true }),
        (args) => {
          plotConvergence(args.files as string[], args.out, args.x as XAxis);
          console.log(`wrote ${args.out}`);
        },
      )
      .command(
        "inner-cost <file>",
        "inner-iteration cost per round from one metrics CSV",
        (y) =>
          y
            .positional("file", { type: "string", demandOption: true })
            .option("out", { type: "string", demandOption: true }),
        (args) => {
          plotInnerCost(args.file as string, args.out);
          console.log(`wrote ${args.out}`);
        },
      )
      .demandCommand(1)
      .strict()
      .fail((msg, err) => {
        throw err ?? new MetricsError(msg);
      })
      .parseAsync();
    return 0;
  } catch (err) {
    if (err instanceof MetricsError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const entry = process.argv[1];
if (entry && (entry.endsWith("cli.js") || entry.endsWith("plots"))) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
