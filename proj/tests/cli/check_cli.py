"""Runs every cpm subcommand and validates its JSON against schemas/."""

import csv
import io
import json
import os
import random
import subprocess
import sys
import tempfile

from jsonschema import Draft202012Validator

CLI, SCHEMAS = sys.argv[1], sys.argv[2]
failures = []


def validator(name):
    with open(os.path.join(SCHEMAS, name + ".schema.json")) as f:
        schema = json.load(f)
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def run(*args, code=0):
    p = subprocess.run([CLI, *args], capture_output=True, text=True)
    if p.returncode != code:
        failures.append(f"{args[0]}: exit {p.returncode}, expected {code}: {p.stderr}")
    return p


def check(name, doc):
    errors = sorted(validator(name).iter_errors(doc), key=str)
    for e in errors:
        failures.append(f"{name}: {e.message} at {list(e.absolute_path)}")


def check_stdout(name, p):
    try:
        check(name, json.loads(p.stdout))
    except json.JSONDecodeError as e:
        failures.append(f"{name}: stdout is not JSON ({e})")


def check_error(p):
    lines = p.stderr.strip().splitlines()
    if not lines:
        failures.append("error: nothing on stderr")
        return
    check("error", json.loads(lines[-1]))


with tempfile.TemporaryDirectory() as tmp:
    rng = random.Random(3)
    topics = [["train", "leaves", "monday", "cambridge"],
              ["hotel", "cheap", "parking", "wifi", "\"quoted\""],
              ["taxi", "arrive", "pick", "time"]]
    corpus = os.path.join(tmp, "corpus.txt")
    with open(corpus, "w", encoding="utf-8") as f:
        f.write("# comment\n")
        for i in range(50):
            t = rng.choice(topics)
            f.write(" ".join(rng.choice(t) for _ in range(5)) + (" ?" if i % 4 == 0 else "") + "\n")
    model = os.path.join(tmp, "model.json")
    points = os.path.join(tmp, "points.json")
    layer = os.path.join(tmp, "layer.json")

    check_stdout("fit", run("fit", corpus, "--dim", "3", "--seed", "2", "--out", model,
                            "--emit-points", points))
    with open(model) as f:
        check("model", json.load(f))
    with open(points) as f:
        check("points", json.load(f))

    check_stdout("topwords", run("topwords", "--model", model, "--all"))
    check_stdout("topwords", run("topwords", "--model", model, "--vertex", "2", "--k", "4"))
    check_stdout("nearest", run("nearest", "--model", model, "--corpus", corpus, "--vertex", "1"))
    check_stdout("coeffs", run("coeffs", "--model", model, "--text", "cheap hotel, please"))
    check_stdout("simmatrix", run("simmatrix", "--model", model, "--text", "cheap \"quoted\" hotel"))
    check_stdout("attend", run("attend", "--model", model, "--text", "train to cambridge",
                               "--vanilla", "--dump-layer", layer))
    with open(layer) as f:
        check("layer", json.load(f))
    check_stdout("attend", run("attend", "--model", model, "--text", "taxi"))
    check_stdout("attribute", run("attribute", "--model", model, "--text", "cheap taxi"))
    check_stdout("attribute", run("attribute", "--model", model, "--text", "cheap taxi",
                                  "--target", "tokens", "--steps", "32"))

    # CSV export parses back into the same matrices.
    p = run("simmatrix", "--model", model, "--text", "cheap, \"quoted\" hotel", "--format", "csv")
    rows = list(csv.reader(io.StringIO(p.stdout, newline="")))
    sim = json.loads(run("simmatrix", "--model", model, "--text",
                         "cheap, \"quoted\" hotel").stdout)
    if rows[0] != ["matrix", "token", *sim["tokens"]]:
        failures.append(f"csv header {rows[0]}")
    n = len(sim["tokens"])
    for i in range(n):
        for which, offset in (("raw", 1), ("hat", 1 + n)):
            row = rows[offset + i]
            if row[:2] != [which, sim["tokens"][i]] or \
                    [float(v) for v in row[2:]] != sim[which][i]:
                failures.append(f"csv row {which} {i} mismatch")

    # Errors: exit codes and machine-readable stderr.
    check_error(run("fit", corpus, "--dim", "40", "--out", model + ".x", code=2))
    check_error(run("coeffs", "--model", os.path.join(tmp, "missing.json"), "--text", "a", code=1))
    check_error(run("topwords", "--model", model, "--vertex", "9", code=2))
    check_error(run("attend", "--model", model, "--text", "", code=2))
    check_error(run("fit", "--nope", code=2))

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("all CLI outputs validate against their schemas")
