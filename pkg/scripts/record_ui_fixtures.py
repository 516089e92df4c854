"""Record session-service responses as fixtures for the frontend tests.

Drives the full-adder and flipflop diagnosis sessions through the real
service and saves every response verbatim; the frontend contract tests
assert field-for-field against these files.
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from mbdiag.service import create_app

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "frontend" / "fixtures"


def record(client: TestClient, model_name: str, config: dict, sequence) -> dict:
    document = json.loads((ROOT / "models" / f"{model_name}.json").read_text())
    created = client.post("/models", json=document).json()
    model_id = created["model_id"]
    session = client.post("/sessions", json={"model_id": model_id, **config}).json()
    steps = [{"action": {"type": "create", "config": config}, "response": session}]
    for component, value in sequence:
        response = client.post(
            f"/sessions/{session['id']}/measurements",
            json={"component": component, "time": 0, "value": value},
        )
        steps.append({
            "action": {"type": "measure", "component": component,
                       "time": 0, "value": value},
            "response": response.json(),
        })
    return {"model": model_name, "model_document": document,
            "model_id": model_id, "steps": steps}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app())
    fulladder = record(
        client, "fulladder", {"rule": "r2", "strategy": "halving"},
        [("a", True), ("b", False), ("cin", True),
         ("or1", False), ("xor2", False), ("and2", True)],
    )
    (OUT / "fulladder_session.json").write_text(
        json.dumps(fulladder, indent=2) + "\n")
    flipflop = record(
        client, "flipflop", {"rule": "r2", "strategy": "entropy"},
        [("D", False), ("S", False), ("E", True),
         ("and6", False), ("and7", False), ("nand5", True)],
    )
    (OUT / "flipflop_session.json").write_text(
        json.dumps(flipflop, indent=2) + "\n")
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
