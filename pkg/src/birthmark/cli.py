"""birthmark command-line interface.

    birthmark dump FILE                      annotated hex dump of wire files
    birthmark audit --parent --result ...    replay a deviation report
    birthmark verify IMAGE --node URL        public verification
    birthmark sim run SCENARIO               adversary scenarios / full suite
    birthmark bench camera|lookup            performance measurements
    birthmark ma init|provision|...          manufacturer-authority admin
    birthmark chain stats                    storage growth arithmetic
    birthmark serve --log FILE               JSON-RPC node for local testing
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import audit as audit_mod
from . import bench as bench_mod
from . import crypto, verifier, wire
from .authority import ManufacturerAuthority
from .chain import NodeRpcServer, RecordStore, ValidatorNode, projected_growth
from .errors import BirthmarkError


@click.group()
def main():
    """Birthmark photo-authentication toolkit."""


# ---------------------------------------------------------------------------
# dump
# ---------------------------------------------------------------------------

@main.command()
@click.argument("file", type=click.Path(exists=True, path_type=Path))
def dump(file: Path):
    """Print annotated field offsets for any birthmark wire file."""
    try:
        click.echo(wire.dump_annotated(file.read_bytes()))
    except BirthmarkError as exc:
        raise click.ClickException(str(exc))


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def _ops_from_json(entries) -> tuple:
    ops = []
    for entry in entries:
        kind = entry.get("kind")
        if kind == "exposure":
            ops.append(audit_mod.DeclaredOp.exposure(float(entry["stops"])))
        elif kind == "white_balance":
            ops.append(audit_mod.DeclaredOp.white_balance(*[float(g) for g in entry["gains"]]))
        elif kind == "denoise":
            ops.append(audit_mod.DeclaredOp.denoise(int(entry["radius"])))
        elif kind == "crop":
            ops.append(audit_mod.DeclaredOp.crop(*[int(v) for v in entry["rect"]]))
        else:
            raise click.ClickException(f"unknown operation kind {kind!r}")
    return tuple(ops)


@main.command()
@click.option("--parent", "parent_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Authenticated parent image (.bmpx).")
@click.option("--result", "result_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Edited result image (.bmpx).")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True, path_type=Path),
              help='Deviation report JSON: {"operations": [...], "reported_score": 0.0}.')
@click.option("--seed", default=0, show_default=True, help="Patch-sampling seed.")
@click.option("--threshold", default=audit_mod.DEFAULT_THRESHOLD, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def audit(parent_path, result_path, report_path, seed, threshold, as_json):
    """Replay declared operations on random patches and score deviation."""
    parent = wire.read_bmpx(parent_path)
    result = wire.read_bmpx(result_path)
    spec = json.loads(report_path.read_text())
    report = audit_mod.DeviationReport(
        operations=_ops_from_json(spec.get("operations", [])),
        reported_score=float(spec.get("reported_score", 0.0)),
    )
    verdict = audit_mod.audit(parent, result, report, rng_seed=seed, threshold=threshold)
    payload = {
        "measured_score": verdict.measured_score,
        "reported_score": report.reported_score,
        "threshold": threshold,
        "passed": verdict.passed,
        "flags": verdict.flags,
        "patch_size": verdict.patch_size,
    }
    if as_json:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(f"measured score: {verdict.measured_score:.4f} "
                   f"(reported {report.reported_score:.4f}, threshold {threshold:.2f})")
        click.echo("verdict: " + ("PASS" if verdict.passed else f"FAIL {verdict.flags}"))
    sys.exit(0 if verdict.passed else 1)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _parse_meta(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.ClickException(f"--meta expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        if key not in ("nonce", "ts", "geo", "owner"):
            raise click.ClickException(f"--meta keys are nonce/ts/geo/owner, got {key!r}")
        out[key] = value
    return out


@main.command()
@click.argument("image", type=click.Path(exists=True, path_type=Path))
@click.option("--node", "node_url", required=True, help="Validator JSON-RPC endpoint.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--chain", "want_chain", is_flag=True, help="Fetch the parent custody chain.")
@click.option("--meta", "meta_pairs", multiple=True,
              help="Metadata claims: nonce=<file> ts=<YYYY-MM> geo=<lat,lon> owner=<id>.")
def verify(image, node_url, as_json, want_chain, meta_pairs):
    """Verify a local image against the chain; exit 0 found, 1 not, 2 error."""
    try:
        report = verifier.verify_file(image, node_url, want_chain=want_chain)
        meta = _parse_meta(meta_pairs)
        if meta and report.status == "found":
            nonce = None
            if "nonce" in meta:
                nonce = verifier.read_nonce_sidecar(meta["nonce"])
            claims = {}
            if "ts" in meta:
                claims["timestamp"] = meta["ts"]
            if "geo" in meta:
                claims["geolocation"] = meta["geo"]
            if "owner" in meta:
                claims["owner"] = meta["owner"]
            report.metadata = verifier.verify_metadata(report.record, nonce, claims)
    except BirthmarkError as exc:
        click.echo(f"error: {exc}", err=True)
        click.echo("hint: check the node URL and retry", err=True)
        sys.exit(verifier.EXIT_ERROR)
    if as_json:
        click.echo(json.dumps(report.to_json_dict(), indent=2))
    else:
        click.echo(report.to_text(), nl=False)
    sys.exit(report.exit_code)


# ---------------------------------------------------------------------------
# sim
# ---------------------------------------------------------------------------

@main.group()
def sim():
    """Adversary-harness scenarios."""


@sim.command("list")
def sim_list():
    """List built-in scenarios."""
    from .harness import SUITE_ORDER

    for name in SUITE_ORDER:
        click.echo(name)
    click.echo("suite  (run every scenario and write the full report)")


@sim.command("run")
@click.argument("scenario")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Write report.json/report.txt/CSV and figures here.")
@click.option("--json", "as_json", is_flag=True, help="Print the JSON report.")
@click.option("--no-figures", is_flag=True, help="Skip figure rendering.")
def sim_run(scenario, seed, out_dir, as_json, no_figures):
    """Run one scenario (built-in name or scenario file) or 'suite'."""
    from .harness import SecurityReport, resolve, run_suite, write_outputs

    if scenario == "suite":
        report = run_suite(seed=seed)
    else:
        try:
            outcome = resolve(scenario, seed=seed).run()
        except BirthmarkError as exc:
            raise click.ClickException(str(exc))
        report = SecurityReport(seed=seed, outcomes=[outcome])
    if out_dir is not None:
        paths = write_outputs(report, out_dir, figures=not no_figures)
        for path in paths:
            click.echo(f"wrote {path}")
    if as_json:
        click.echo(report.to_json_bytes().decode("utf-8"))
    elif out_dir is None:
        click.echo(report.to_text(), nl=False)
    sys.exit(0 if report.all_defended else 1)


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@main.group()
def bench():
    """Performance benchmarks against the published targets."""


@bench.command("camera")
@click.option("--images", default=100, show_default=True)
@click.option("--width", default=4000, show_default=True)
@click.option("--height", default=3000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def bench_camera_cmd(images, width, height, seed, as_json, out_dir):
    """Camera-side authentication delta (hash + encrypt + sign)."""
    result = bench_mod.bench_camera(images=images, width=width, height=height, seed=seed)
    _emit_bench([result], as_json, out_dir)


@bench.command("lookup")
@click.option("--records", default=1_000_000, show_default=True)
@click.option("--queries", default=2_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--e2e/--no-e2e", default=True, show_default=True,
              help="Also measure end-to-end verify over loopback RPC.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def bench_lookup_cmd(records, queries, seed, e2e, as_json, out_dir):
    """Hash-lookup latency at scale, plus loopback end-to-end verify."""
    results = [bench_mod.bench_lookup(records=records, queries=queries, seed=seed)]
    if e2e:
        results.append(bench_mod.bench_verify_e2e(records=min(records, 100_000), seed=seed))
    _emit_bench(results, as_json, out_dir)


def _emit_bench(results, as_json, out_dir):
    if out_dir is not None:
        for path in bench_mod.write_bench_outputs(results, out_dir):
            click.echo(f"wrote {path}")
    if as_json or out_dir is None:
        payload = {r.name: r.to_json_dict() for r in results}
        click.echo(json.dumps(payload, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# ma admin
# ---------------------------------------------------------------------------

def _state_path(state_dir: Path) -> Path:
    return state_dir / "ma_state.json"


@main.group()
def ma():
    """Manufacturer-authority administration (state-directory based)."""


@ma.command("init")
@click.option("--dir", "state_dir", required=True, type=click.Path(path_type=Path))
@click.option("--validator-id", default="CANON_001", show_default=True)
@click.option("--tables", default="8,8", show_default=True, help="Comma-separated keys per table.")
def ma_init(state_dir, validator_id, tables):
    """Create a fresh MA state directory."""
    state_dir.mkdir(parents=True, exist_ok=True)
    sizes = [int(s) for s in tables.split(",") if s]
    authority = ManufacturerAuthority(validator_id=validator_id, table_sizes=sizes)
    authority.save_full_state(_state_path(state_dir))
    click.echo(f"initialized {validator_id} with {len(sizes)} table(s) in {state_dir}")


@ma.command("provision")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--fingerprint", required=True, help="Device NUC hash (64 hex chars).")
@click.option("--pubkey", required=True, help="Device public key (33-byte compressed point, hex).")
def ma_provision(state_dir, fingerprint, pubkey):
    """Register a device fingerprint and assign key-table slots."""
    authority = ManufacturerAuthority.load_full_state(_state_path(state_dir))
    try:
        cert, slots = authority.provision_device(bytes.fromhex(fingerprint), bytes.fromhex(pubkey))
    except BirthmarkError as exc:
        raise click.ClickException(str(exc))
    authority.save_full_state(_state_path(state_dir))
    click.echo(json.dumps({
        "device_cert": cert.encode().hex(),
        "slots": [{"table_id": s.table_id, "key_index": s.key_index, "key": s.key.hex()} for s in slots],
    }, indent=2))


@ma.command("revoke")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--fingerprint", required=True)
def ma_revoke(state_dir, fingerprint):
    """Add a fingerprint to the revocation list (idempotent)."""
    authority = ManufacturerAuthority.load_full_state(_state_path(state_dir))
    authority.revoke(bytes.fromhex(fingerprint))
    authority.save_full_state(_state_path(state_dir))
    click.echo("revoked")


@ma.command("rotate")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--table", "table_id", required=True, type=int)
@click.option("--index", "key_index", required=True, type=int)
def ma_rotate(state_dir, table_id, key_index):
    """Rotate one key slot; prints the OTA notice for affected devices."""
    authority = ManufacturerAuthority.load_full_state(_state_path(state_dir))
    try:
        notice = authority.rotate_key(table_id, key_index, now=time.time())
    except BirthmarkError as exc:
        raise click.ClickException(str(exc))
    authority.save_full_state(_state_path(state_dir))
    click.echo(json.dumps({
        "table_id": notice.table_id,
        "key_index": notice.key_index,
        "new_key": notice.new_key.hex(),
    }, indent=2))


@ma.command("stats")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True, path_type=Path))
def ma_stats(state_dir):
    """Device population, anonymity sets, monthly approval totals."""
    authority = ManufacturerAuthority.load_full_state(_state_path(state_dir))
    click.echo(json.dumps(authority.stats(), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# chain
# ---------------------------------------------------------------------------

@main.group()
def chain():
    """Chain-side tooling."""


@chain.command("stats")
@click.option("--records-per-day", default=1_000_000.0, show_default=True)
@click.option("--log", "log_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Existing record log to include store stats for.")
def chain_stats(records_per_day, log_path):
    """Project storage growth (the 153-byte record arithmetic)."""
    payload = {"projected": projected_growth(records_per_day)}
    if log_path is not None:
        store = RecordStore(log_path)
        payload["store"] = store.stats().to_json_dict()
        payload["log_verified"] = store.verify_log()
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8440, show_default=True)
def serve(log_path, host, port):
    """Serve a record log over JSON-RPC (birthmark_lookup/chain/stats)."""
    node = ValidatorNode("local", {}, {}, log_path=log_path)
    server = NodeRpcServer(node, host=host, port=port)
    click.echo(f"serving {len(node.store)} records at {server.url} (Ctrl+C to stop)")
    try:
        server.start()
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
