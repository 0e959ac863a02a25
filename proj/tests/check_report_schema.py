"""Runs synth/train/evaluate on a toy corpus and validates the report schema."""

import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def run(binary, *args):
    subprocess.run([binary, *args], check=True, stdout=subprocess.DEVNULL)


def main():
    binary, schema_path, work = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    run(binary, "synth", "--users", "6", "--duration", "150", "--out", str(work / "data"))
    run(binary, "train", "--data", str(work / "data"), "--out", str(work / "model"),
        "--window-sec", "3", "--epochs", "1", "--batches", "2",
        "--val-users", "2", "--test-users", "2")
    run(binary, "evaluate", "--model", str(work / "model" / "model.gait"), "--window-sec", "3",
        "--data", str(work / "data"), "--report", str(work / "report.json"))

    schema = json.loads(schema_path.read_text())
    report = json.loads((work / "report.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
    n = len(report["thresholds"])
    assert len(report["far_curve"]) == n and len(report["frr_curve"]) == n
    users = len(report["per_user"])
    for u in report["per_user"]:
        assert u["genuine_trials"] == 40, u
        assert u["impostor_trials"] == 15 * (users - 1), u
    print(f"report with {users} users validates against {schema_path.name}")


if __name__ == "__main__":
    main()
