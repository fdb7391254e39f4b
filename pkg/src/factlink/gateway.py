"""Uniform access to external computational tools and remote databases.

Every tool is described declaratively: which relations it can verify, how it
is reached (offline fixture file, flat file, web form, or web service), which
fields it returns, and the named plug-in components used to bridge schema and
format gaps. Fixture adapters answer from bundled delimited files and are the
only adapters exercised offline; remote adapters sit behind a capability flag
with a single pluggable transport.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import InvalidSpec, SchemaMismatch, ToolUnavailable
from .tables import RelationalTable, read_table

ADAPTERS = ("fixture", "web-form", "web-service", "flat-file")


@dataclass(frozen=True)
class ToolSpec:
    """Declarative description of one tool or remote database access."""

    name: str
    verifies: tuple[str, ...] = ()
    adapter: str = "fixture"
    location: str | None = None
    extract_fields: tuple[str, ...] = ()
    matcher: str | None = None
    wrapper: str | None = None
    filler: str | None = None
    transformer: str | None = None
    submit_schema: tuple[str, ...] = ()
    form_condition: str | None = None
    symmetric: bool = False


@dataclass(frozen=True)
class PairFixture:
    """Identifier pairs a fixture tool confirms; closed under swap if symmetric."""

    tool: str
    pairs: frozenset[tuple[str, str]]

    def holds(self, id_a: str, id_b: str) -> bool:
        return (id_a, id_b) in self.pairs


@dataclass
class _FixtureData:
    header: tuple[str, ...]
    rows: list[tuple[str, ...]]
    pairs: PairFixture

    def partners(self, key: str) -> list[tuple[str, ...]]:
        return [row[1:] for row in self.rows if row and row[0] == key]


def _load_fixture(spec: ToolSpec, base_dir: Path | None) -> _FixtureData:
    path = Path(spec.location or "")
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise InvalidSpec(f"tool {spec.name!r}: fixture file {path} does not exist")
    table = read_table(path, name=spec.name)
    rows = list(table.rows)
    pair_set: set[tuple[str, str]] = set()
    for row in rows:
        if len(row) >= 2:
            pair_set.add((row[0], row[1]))
            if spec.symmetric:
                pair_set.add((row[1], row[0]))
    if spec.symmetric:
        # keep the extract view consistent with the closed pair set
        reversed_rows = [
            (row[1], row[0]) + row[2:]
            for row in rows
            if len(row) >= 2 and (row[1], row[0]) not in {(r[0], r[1]) for r in rows}
        ]
        rows = rows + reversed_rows
    return _FixtureData(
        header=tuple(table.columns),
        rows=rows,
        pairs=PairFixture(tool=spec.name, pairs=frozenset(pair_set)),
    )


class ToolGateway:
    """Registry and dispatcher for tool invocations.

    Verdicts of `apply_op` are memoized per (tool, id, id); fixtures are pure
    so the cache never changes an answer, only the number of adapter reads.
    """

    def __init__(
        self,
        allow_remote: bool = False,
        transport: Callable[[ToolSpec, dict], list[dict]] | None = None,
    ) -> None:
        self._specs: dict[str, ToolSpec] = {}
        self._fixtures: dict[str, _FixtureData] = {}
        self._memo: dict[tuple[str, str, str], bool] = {}
        self._allow_remote = allow_remote
        self._transport = transport
        self.probe_count = 0

    # --- registration -------------------------------------------------------

    def register(self, spec: ToolSpec, base_dir: str | Path | None = None) -> str:
        """Validate a tool spec and make it addressable by name."""
        if not spec.name:
            raise InvalidSpec("tool spec has no name")
        if spec.adapter not in ADAPTERS:
            raise InvalidSpec(f"tool {spec.name!r}: unknown adapter {spec.adapter!r}")
        if spec.adapter == "web-form" and not (spec.filler and spec.wrapper):
            raise InvalidSpec(
                f"tool {spec.name!r}: web-form adapters need a filler and a wrapper"
            )
        if spec.adapter == "web-service" and not spec.transformer:
            raise InvalidSpec(
                f"tool {spec.name!r}: web-service adapters need a transformer"
            )
        if spec.adapter in ("fixture", "flat-file"):
            data = _load_fixture(
                spec, Path(base_dir) if base_dir is not None else None
            )
            self._fixtures[spec.name] = data
        self._specs[spec.name] = spec
        return spec.name

    def spec(self, name: str) -> ToolSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise ToolUnavailable(f"no tool registered under {name!r}") from None

    def registered(self) -> list[str]:
        return list(self._specs)

    def clear_memo(self) -> None:
        self._memo.clear()

    # --- operations -----------------------------------------------------------

    def apply_op(self, op: str, id_a: str, id_b: str) -> bool:
        """Ask tool `op` whether the relation holds between two identifiers."""
        memo_key = (op, id_a, id_b)
        if memo_key in self._memo:
            return self._memo[memo_key]
        spec = self.spec(op)
        if spec.adapter in ("fixture", "flat-file"):
            self.probe_count += 1
            verdict = self._fixtures[op].pairs.holds(id_a, id_b)
        else:
            rows = self._remote_call(spec, {"id_a": id_a, "id_b": id_b})
            verdict = bool(rows)
        self._memo[memo_key] = verdict
        return verdict

    def extract(self, spec: ToolSpec | str, input_table: RelationalTable) -> RelationalTable:
        """Submit each input row to the tool and collect its projected fields.

        Output columns are exactly `extract_fields`; rows follow input order,
        then the adapter's own order.
        """
        if isinstance(spec, str):
            spec = self.spec(spec)
        if spec.name not in self._specs:
            self.register(spec)
        missing = [c for c in spec.submit_schema if c not in input_table.columns]
        if missing:
            raise SchemaMismatch(
                f"tool {spec.name!r}: input table lacks submit columns {missing}"
            )
        out_rows: list[tuple[str, ...]] = []
        if spec.adapter in ("fixture", "flat-file"):
            data = self._fixtures[spec.name]
            field_pos: list[int] = []
            for fieldname in spec.extract_fields:
                if fieldname not in data.header[1:]:
                    raise SchemaMismatch(
                        f"tool {spec.name!r}: fixture provides no field {fieldname!r}"
                    )
                field_pos.append(data.header[1:].index(fieldname))
            submit_col = spec.submit_schema[0] if spec.submit_schema else input_table.columns[0]
            for row in input_table.rows:
                key = input_table.cell(row, submit_col)
                for partner in data.partners(key):
                    out_rows.append(tuple(partner[i] for i in field_pos))
        else:
            for row in input_table.rows:
                payload = {
                    c: input_table.cell(row, c) for c in spec.submit_schema
                }
                for record in self._remote_call(spec, payload):
                    try:
                        out_rows.append(
                            tuple(record[f] for f in spec.extract_fields)
                        )
                    except KeyError as exc:
                        raise SchemaMismatch(
                            f"tool {spec.name!r}: response lacks field {exc}"
                        ) from None
        return RelationalTable(
            name=f"{spec.name}_extract",
            columns=list(spec.extract_fields),
            rows=out_rows,
        )

    def _remote_call(self, spec: ToolSpec, payload: dict) -> list[dict]:
        if not self._allow_remote or self._transport is None:
            raise ToolUnavailable(
                f"tool {spec.name!r} uses a remote adapter and remote access "
                "is disabled"
            )
        try:
            return self._transport(spec, payload)
        except Exception as exc:  # transport failures surface uniformly
            raise ToolUnavailable(f"tool {spec.name!r} transport failed: {exc}") from exc
