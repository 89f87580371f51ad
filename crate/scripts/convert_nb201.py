#!/usr/bin/env python3
"""Convert an upstream NAS-Bench-201 / NATS-Bench dump to the JSONL format
archsearch ingests.

Output: one JSON object per line,

    {"arch": "|nor_conv_3x3~0|+|...|",
     "cifar10":        {"valid": 91.55, "test": 94.37},
     "cifar100":       {"valid": 73.49, "test": 73.51},
     "imagenet16_120": {"valid": 46.77, "test": 47.31}}

Accuracy conventions (the ones search papers report):
  * cifar10/valid  -- validation accuracy on the cifar10-valid split
                      (half of the training set held out for search).
  * cifar10/test   -- test accuracy of the network trained on the full
                      cifar10 training set.
  * cifar100 and ImageNet16-120 use their benchmark valid/test splits.
All values are means over the benchmark's training seeds at the full
training schedule (200 epochs for NAS-Bench-201, hp="200").

Supported inputs:
  * NAS-Bench-201 .pth file (e.g. NAS-Bench-201-v1_1-096897.pth),
    read through the `nas_201_api` package:    pip install nas-bench-201
  * NATS-Bench topology archive (e.g. NATS-tops-v1_0-3ffb9-simple),
    read through the `nats_bench` package:     pip install nats_bench

Usage:
    python scripts/convert_nb201.py NAS-Bench-201-v1_1-096897.pth nb201.jsonl
    python scripts/convert_nb201.py --format nats NATS-tops-v1_0-3ffb9-simple nb201.jsonl

Then validate and normalize with the main tool, which re-emits the table in
canonical architecture order and prints its content digest:

    archsearch ingest --input nb201.jsonl --out nb201.canonical.jsonl
"""

import argparse
import json
import sys

DATASETS = ["cifar10", "cifar100", "ImageNet16-120"]
FIELDS = {"cifar10": "cifar10", "cifar100": "cifar100", "ImageNet16-120": "imagenet16_120"}
EXPECTED = 15_625


def convert_nb201(path):
    """Yield (arch, {field: {valid, test}}) from a NAS-Bench-201 .pth dump."""
    from nas_201_api import NASBench201API

    api = NASBench201API(path, verbose=False)
    for index in range(len(api)):
        arch = api.arch(index)
        record = {}
        for dataset in DATASETS:
            if dataset == "cifar10":
                # valid comes from the cifar10-valid split, test from the
                # full-training-set run
                valid = api.get_more_info(index, "cifar10-valid", hp="200", is_random=False)[
                    "valid-accuracy"
                ]
                test = api.get_more_info(index, "cifar10", hp="200", is_random=False)[
                    "test-accuracy"
                ]
            else:
                info = api.get_more_info(index, dataset, hp="200", is_random=False)
                valid = info["valid-accuracy"]
                test = info["test-accuracy"]
            record[FIELDS[dataset]] = {"valid": valid, "test": test}
        yield arch, record


def convert_nats(path):
    """Yield (arch, {field: {valid, test}}) from a NATS-Bench topology archive."""
    from nats_bench import create

    api = create(path, "tss", fast_mode=True, verbose=False)
    for index in range(len(api)):
        arch = api.arch(index)
        record = {}
        for dataset in DATASETS:
            if dataset == "cifar10":
                valid = api.get_more_info(index, "cifar10-valid", hp="200", is_random=False)[
                    "valid-accuracy"
                ]
                test = api.get_more_info(index, "cifar10", hp="200", is_random=False)[
                    "test-accuracy"
                ]
            else:
                info = api.get_more_info(index, dataset, hp="200", is_random=False)
                valid = info["valid-accuracy"]
                test = info["test-accuracy"]
            record[FIELDS[dataset]] = {"valid": valid, "test": test}
        yield arch, record


def main():
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("input", help=".pth file (nb201) or archive directory (nats)")
    parser.add_argument("output", help="JSONL file to write")
    parser.add_argument(
        "--format",
        choices=["nb201", "nats"],
        default="nb201",
        help="input flavor (default: nb201)",
    )
    args = parser.parse_args()

    reader = convert_nb201 if args.format == "nb201" else convert_nats
    count = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for arch, record in reader(args.input):
            line = {"arch": arch}
            line.update(record)
            out.write(json.dumps(line) + "\n")
            count += 1
            if count % 1000 == 0:
                print(f"  {count}/{EXPECTED}", file=sys.stderr)

    if count != EXPECTED:
        print(
            f"warning: wrote {count} entries, expected {EXPECTED}; "
            "`archsearch ingest` will reject the file unless --allow-partial is set",
            file=sys.stderr,
        )
    print(f"wrote {count} entries to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
