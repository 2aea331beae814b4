"""Command-line client of the HTTP service.

Every verb except `serve` talks to a running service over HTTP; `serve`
starts the service itself.  The client factory is module-level so tests can
swap in an in-process ASGI transport.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import httpx

DEFAULT_BASE_URL = "http://127.0.0.1:8000"


def make_client(base_url: str) -> httpx.Client:
    return httpx.Client(base_url=base_url, timeout=3600.0)


def _fail_on_error(resp: httpx.Response) -> dict:
    if resp.status_code >= 400:
        raise click.ClickException(f"service error {resp.status_code}: {resp.text}")
    return resp.json()


@click.group()
@click.option("--base-url", default=DEFAULT_BASE_URL, show_default=True)
@click.pass_context
def main(ctx: click.Context, base_url: str) -> None:
    """Batch broadcast-simulation client."""
    ctx.ensure_object(dict)
    ctx.obj["base_url"] = base_url


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("rtbsim.service.app:app", host=host, port=port)


def _submit_and_wait(
    ctx: click.Context, payload: dict, poll_interval: float
) -> None:
    with make_client(ctx.obj["base_url"]) as client:
        info = _fail_on_error(client.post("/jobs", json=payload))
        job_id = info["job_id"]
        click.echo(f"job {job_id} submitted")
        while info["state"] in ("queued", "running"):
            time.sleep(poll_interval)
            info = _fail_on_error(client.get(f"/jobs/{job_id}"))
    if info["state"] != "done":
        raise click.ClickException(f"job {job_id} failed:\n{info['detail']}")
    click.echo(f"job {job_id} done; outputs under {info['output_dir']}")
    for name in info["files"]:
        click.echo(f"  {name}")
    if info["failures"]:
        click.echo("failed runs:")
        for key, msg in info["failures"].items():
            click.echo(f"  {key}: {msg}")


def _run_payload(config: str, out, seeds, schemes, densities) -> dict:
    payload: dict = {"config_text": Path(config).read_text()}
    if out is not None:
        payload["output_dir"] = str(out)
    if seeds:
        payload["seeds"] = [int(s) for s in seeds.split(",") if s.strip()]
    if schemes:
        payload["schemes"] = list(schemes)
    if densities:
        payload["densities"] = [float(d) for d in densities.split(",") if d.strip()]
    return payload


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--seeds", default=None, help="comma-separated seed list override")
@click.option("--scheme", "schemes", multiple=True, help="restrict to these schemes")
@click.option("--poll-interval", default=1.0, show_default=True)
@click.pass_context
def run(ctx, config, out, seeds, schemes, poll_interval) -> None:
    """Submit a batch run and wait for completion."""
    _submit_and_wait(ctx, _run_payload(config, out, seeds, schemes, None), poll_interval)


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--densities", required=True, help="comma-separated density list")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--seeds", default=None, help="comma-separated seed list override")
@click.option("--scheme", "schemes", multiple=True, help="restrict to these schemes")
@click.option("--poll-interval", default=1.0, show_default=True)
@click.pass_context
def sweep(ctx, config, densities, out, seeds, schemes, poll_interval) -> None:
    """Submit a density sweep and wait for completion."""
    _submit_and_wait(
        ctx, _run_payload(config, out, seeds, schemes, densities), poll_interval
    )


@main.command("channel-table")
@click.option("--bins", default=8, show_default=True)
@click.option("--mean-snr-db", default=0.0, show_default=True)
@click.option("--sigma", default=0.05, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def channel_table(ctx, bins, mean_snr_db, sigma, out) -> None:
    """Fetch the per-bin channel table as CSV."""
    with make_client(ctx.obj["base_url"]) as client:
        data = _fail_on_error(
            client.post(
                "/channel/table",
                json={"num_bins": bins, "mean_snr_db": mean_snr_db, "sigma": sigma},
            )
        )
    if out is not None:
        Path(out).write_text(data["csv"])
        click.echo(f"wrote {out}")
    else:
        sys.stdout.write(data["csv"])


@main.command()
@click.option(
    "--topology", required=True, type=click.Path(exists=True, dir_okay=False),
    help="topology CSV as produced by the topology dump",
)
@click.option("--bins", default=8, show_default=True)
@click.option("--mean-snr-db", default=0.0, show_default=True)
@click.option("--l-bits", default=4096, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--source", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def oracle(ctx, topology, bins, mean_snr_db, l_bits, seed, source, out) -> None:
    """Solve the minimum-cost broadcast tree for a small topology."""
    payload = {
        "topology_csv": Path(topology).read_text(),
        "num_bins": bins,
        "mean_snr_db": mean_snr_db,
        "l_bits": l_bits,
        "seed": seed,
        "source": source,
    }
    with make_client(ctx.obj["base_url"]) as client:
        data = _fail_on_error(client.post("/oracle/solve", json=payload))
    click.echo(f"optimal cost: {data['optimal_cost']}")
    click.echo(f"game-tree cost: {data['gbbtc_cost']}")
    if out is not None:
        Path(out).write_text(data["tree_csv"])
        click.echo(f"wrote {out}")
    else:
        sys.stdout.write(data["tree_csv"])


if __name__ == "__main__":
    main()
