#!/usr/bin/env node
/**
 * Command line entry point.
 *
 *   protoverb-export make-corpus     --out corpus.json [--train-per-class N] ...
 *   protoverb-export export-dataset  --corpus c.json --template news-t1 --model toy-mlm-48 --out d.ndjson
 *   protoverb-export export-vocab    --corpus c.json --template news-t1 --model toy-mlm-48 --out v.ndjson
 *
 * All commands print one "wrote <path> (...)" line on success and a single
 * "error: ..." line on stderr with exit code 1 on failure.
 */

import * as fs from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { loadCorpus, makeNewsCorpus, saveCorpus } from "./corpus";
import { exportDataset, exportVocabProbe, loadVerbalizer, Split } from "./export";
import { loadModel } from "./model";
import { resolveTemplate } from "./template";

function parseSplits(raw: string): Split[] {
  return raw.split(",").map((s) => s.trim()).filter((s) => s.length > 0) as Split[];
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName("protoverb-export")
    .command(
      "make-corpus",
      "generate a synthetic four-class news corpus",
      (y) =>
        y
          .option("out", { type: "string", demandOption: true })
          .option("train-per-class", { type: "number", default: 24 })
          .option("test-per-class", { type: "number", default: 130 })
          .option("seed", { type: "number", default: 0 })
          .option("noise-rate", { type: "number", default: 0.15 }),
      (argv) => {
        const corpus = makeNewsCorpus({
          trainPerClass: argv.trainPerClass,
          testPerClass: argv.testPerClass,
          seed: argv.seed,
          noiseRate: argv.noiseRate,
        });
        saveCorpus(corpus, argv.out);
        const n = corpus.train.length + corpus.test.length;
        console.log(`wrote ${argv.out} (${n} sentences)`);
      }
    )
    .command(
      "export-dataset",
      "export mask-position embeddings for a corpus",
      (y) =>
        y
          .option("corpus", { type: "string", demandOption: true })
          .option("template", { type: "string", demandOption: true })
          .option("model", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("verbalizer", { type: "string" })
          .option("splits", { type: "string", default: "train,test" }),
      (argv) => {
        const result = exportDataset({
          corpus: loadCorpus(argv.corpus),
          template: resolveTemplate(argv.template),
          model: loadModel(argv.model),
          verbalizer: argv.verbalizer ? loadVerbalizer(argv.verbalizer) : undefined,
          splits: parseSplits(argv.splits),
        });
        fs.writeFileSync(argv.out, result.content);
        console.log(`wrote ${argv.out} (${result.nRecords} records)`);
      }
    )
    .command(
      "export-vocab",
      "export one probe embedding per vocabulary token",
      (y) =>
        y
          .option("corpus", {
            type: "string",
            demandOption: true,
            describe: "corpus file supplying the class names for the header",
          })
          .option("template", { type: "string", demandOption: true })
          .option("model", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("words", {
            type: "string",
            describe: "comma-separated probe tokens (default: the full model vocabulary)",
          }),
      (argv) => {
        const model = loadModel(argv.model);
        const words = argv.words
          ? argv.words.split(",").map((w) => w.trim()).filter((w) => w.length > 0)
          : model.vocab;
        const result = exportVocabProbe({
          words,
          template: resolveTemplate(argv.template),
          model,
          classNames: loadCorpus(argv.corpus).class_names,
        });
        fs.writeFileSync(argv.out, result.content);
        console.log(`wrote ${argv.out} (${result.nRecords} records)`);
      }
    )
    .demandCommand(1, "pick a command: make-corpus, export-dataset, export-vocab")
    .strict()
    .fail((msg, err) => {
      console.error(`error: ${err ? err.message : msg}`);
      process.exit(1);
    })
    .parseAsync();
}

main().catch((err) => {
  console.error(`error: ${(err as Error).message}`);
  process.exit(1);
});
