"""Thin command-line client for the service.

By default commands dispatch to the FastAPI app in-process, so no server is
needed; `--server URL` sends the same requests to a remote instance instead,
and `mirnet serve` starts one.
"""

from __future__ import annotations

import click

from . import __version__


class ServiceClient:
    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette warns about its own httpx-backed test client
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            if isinstance(detail, list):  # request validation errors
                detail = "; ".join(str(item.get("msg", item)) for item in detail)
            raise click.ClickException(str(detail))
        return resp.json()


@click.group()
@click.version_option(__version__)
@click.option("--server", default=None, envvar="MIRNET_SERVER",
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None):
    """Two-speaker identity embeddings: train, embed, and verify mixtures."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--a", "a", required=True, type=click.Path(), help="First input WAV.")
@click.option("--b", "b", required=True, type=click.Path(), help="Second input WAV.")
@click.option("--out", required=True, type=click.Path(), help="Output mixture WAV.")
@click.option("--seed", default=0, show_default=True, help="Segment offset seed.")
@click.option("--seconds", default=None, type=float,
              help="Mixture length; default is the shorter input's length.")
@click.pass_obj
def mix(client: ServiceClient, a, b, out, seed, seconds):
    """Mix two utterances into one peak-normalized two-speaker WAV."""
    r = client.post("/mix", {"a": a, "b": b, "out": out, "seed": seed,
                             "seconds": seconds})
    click.echo(f"offset_a={r['offset_a']} offset_b={r['offset_b']}")
    click.echo(f"wrote {r['out']}")


@main.command()
@click.option("--config", default=None, type=click.Path(), help="Run config file.")
@click.option("--data", required=True, type=click.Path(), help="Corpus directory.")
@click.option("--out", required=True, type=click.Path(), help="Checkpoint path.")
@click.option("--synth", default=None, type=int,
              help="Generate a synthetic corpus with N speakers in --data first.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config entry (repeatable).")
@click.option("--log", default=None, type=click.Path(),
              help="Training log path; default is <out>.log.")
@click.pass_obj
def train(client: ServiceClient, config, data, out, synth, overrides, log):
    """Train on a corpus and write the best-validation checkpoint."""
    kv = {}
    for item in overrides:
        if "=" not in item:
            raise click.ClickException(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        kv[key.strip()] = value.strip()
    r = client.post("/train", {"data": data, "out": out, "config": config,
                               "synth": synth, "overrides": kv, "log": log})
    for line in r["log_lines"]:
        click.echo(line)
    click.echo(f"checkpoint={r['checkpoint']} best={r['checkpoint_id']}")


@main.command()
@click.option("--ckpt", required=True, type=click.Path(), help="Checkpoint path.")
@click.option("--wav", required=True, type=click.Path(), help="Input mixture WAV.")
@click.option("--out", required=True, type=click.Path(), help="Output CSV path.")
@click.pass_obj
def embed(client: ServiceClient, ckpt, wav, out):
    """Extract the two identity embeddings of a mixture to CSV."""
    r = client.post("/embed", {"ckpt": ckpt, "wav": wav, "out": out})
    click.echo(f"wrote {r['csv']} ({r['embed_dim']}-dim embeddings, 2 slots)")


@main.command(name="eval-eer")
@click.option("--ckpt", required=True, type=click.Path(), help="Checkpoint path.")
@click.option("--data", required=True, type=click.Path(), help="Corpus directory.")
@click.option("--trials", default=200, show_default=True,
              help="Trials per scenario (seen and unseen).")
@click.option("--seed", default=1, show_default=True, help="Trial sampling seed.")
@click.option("--trials-out", default=None, type=click.Path(),
              help="Trial export TSV; default is <ckpt>.trials.tsv.")
@click.pass_obj
def eval_eer(client: ServiceClient, ckpt, data, trials, seed, trials_out):
    """Score verification trials and print seen/unseen equal error rates."""
    r = client.post("/eval-eer", {"ckpt": ckpt, "data": data, "trials": trials,
                                  "seed": seed, "trials_out": trials_out})
    click.echo(r["summary"])


@main.command()
@click.option("--quick", is_flag=True, help="Ops only, skip the composed model.")
@click.option("--seed", default=0, show_default=True)
@click.pass_context
def gradcheck(ctx: click.Context, quick, seed):
    """Run the gradient-check suite and print the max relative error."""
    r = ctx.obj.post("/gradcheck", {"quick": quick, "seed": seed})
    for entry in r["checks"]:
        click.echo(f"{entry['name']}: {entry['rel_error']:.3e} "
                   f"({entry['coords']} coords)")
    click.echo(f"max_rel_error={r['max_rel_error']!r}")
    if not r["passed"]:
        click.echo(f"FAIL: exceeds tolerance {r['tolerance']}", err=True)
        ctx.exit(1)
    click.echo(f"PASS: within tolerance {r['tolerance']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
