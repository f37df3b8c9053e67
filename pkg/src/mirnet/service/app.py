"""FastAPI application wrapping the run functions.

The CLI talks to this app in-process by default, so the endpoints are the
single implementation of every command.  Domain failures surface as 400s
with a human-readable detail string.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, runs
from ..errors import MirnetError
from . import schemas

app = FastAPI(title="mirnet", version=__version__)


@app.exception_handler(MirnetError)
async def _domain_error(request: Request, exc: MirnetError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/mix", response_model=schemas.MixResponse)
def mix(req: schemas.MixRequest) -> dict:
    return runs.run_mix(req.a, req.b, req.out, seconds=req.seconds, seed=req.seed)


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest) -> dict:
    return runs.run_train(req.data, req.out, config=req.config, synth=req.synth,
                          overrides=req.overrides, log=req.log)


@app.post("/embed", response_model=schemas.EmbedResponse)
def embed(req: schemas.EmbedRequest) -> dict:
    return runs.run_embed(req.ckpt, req.wav, out=req.out)


@app.post("/eval-eer", response_model=schemas.EvalEerResponse)
def eval_eer(req: schemas.EvalEerRequest) -> dict:
    return runs.run_eval_eer(req.ckpt, req.data, trials=req.trials,
                             seed=req.seed, trials_out=req.trials_out)


@app.post("/gradcheck", response_model=schemas.GradcheckResponse)
def gradcheck(req: schemas.GradcheckRequest) -> dict:
    return runs.run_gradcheck(quick=req.quick, seed=req.seed)
