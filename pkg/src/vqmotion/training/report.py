"""Per-iteration training records, exported as line-delimited JSON."""

import json
from dataclasses import dataclass, field


@dataclass
class TrainReport:
    header: dict
    records: list[dict] = field(default_factory=list)

    def append(self, record: dict) -> None:
        util = record.get("utilization")
        if util is not None and any(not 0 <= u <= 1 for u in util):
            raise ValueError("utilization entries must lie in [0, 1]")
        self.records.append(record)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"header": self.header}) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "TrainReport":
        with open(path) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines or "header" not in lines[0]:
            raise ValueError("report file must start with a header record")
        return cls(header=lines[0]["header"], records=lines[1:])
