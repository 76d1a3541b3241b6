"""Table and machine renderings shared by every CLI report.

Machine format: a versioned header line, then one ``key=value`` record per
line. Values containing whitespace, quotes or ``=`` are JSON-quoted.
"""

import json
from dataclasses import dataclass, field

MACHINE_VERSION = 1


def _machine_value(v):
    s = v if isinstance(v, str) else str(v)
    if s == "" or any(ch in s for ch in ' \t"=\n'):
        return json.dumps(s)
    return s


@dataclass
class Report:
    kind: str
    columns: list
    rows: list = field(default_factory=list)            # list of dicts
    annotations: list = field(default_factory=list)     # (key, text) pairs
    title: str = ""

    def add(self, **row):
        self.rows.append(row)

    def note(self, key, text):
        self.annotations.append((key, text))

    def machine(self):
        out = ["#betauav-report v%d kind=%s" % (MACHINE_VERSION, self.kind)]
        for row in self.rows:
            out.append(" ".join("%s=%s" % (k, _machine_value(row[k]))
                                for k in self.columns if k in row))
        for key, text in self.annotations:
            out.append("annotation=%s text=%s" % (_machine_value(key), _machine_value(text)))
        return "\n".join(out) + "\n"

    def table(self):
        cells = [[str(row.get(c, "")) for c in self.columns] for row in self.rows]
        widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(self.columns)]
        lines = []
        if self.title:
            lines += [self.title, ""]
        lines.append("  ".join(c.ljust(w) for c, w in zip(self.columns, widths)).rstrip())
        lines.append("  ".join("-" * w for w in widths))
        for r in cells:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        if self.annotations:
            lines.append("")
            for key, text in self.annotations:
                lines.append("* %s: %s" % (key, text))
        return "\n".join(lines) + "\n"

    def render(self, fmt):
        return self.machine() if fmt == "machine" else self.table()
