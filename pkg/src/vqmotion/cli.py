"""Command-line front end.

Every subcommand takes --seed and --preset so runs are reproducible and
switchable between the workstation-sized models and the full-size ones.
Outputs that matter (checkpoints, clips, index text) are pure functions
of the arguments; nothing printed here depends on the wall clock.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .apps import (
    describe_gait,
    emit_prompt_pack,
    latent_motion_matching,
    load_codec_checkpoint,
    load_gpt_checkpoint,
    load_steering_checkpoint,
    metrics,
    parse_index_response,
    save_codec_checkpoint,
    save_gpt_checkpoint,
    save_steering_checkpoint,
    serialize_indices,
    serve_forever,
    states_to_clip,
    track,
    write_prompt_pack,
)
from .apps.prompts import PACK_PRESET_N
from .codec import DecodeDivergence, decode_sim
from .codec.model import window_features
from .data import (
    FAMILIES,
    GaitParams,
    MotionClip,
    add_noise,
    clip_states,
    corpus_manifest,
    desk_corpus,
    generate_gait,
    load_clip,
    save_clip,
)
from .gpt import GptNet, GptTrainConfig, desk_gpt, generate, paper_scale_gpt, train_gpt
from .nn import no_grad
from .sim import Engine, planar_biped
from .steering import (
    SteerTrainConfig,
    SteeringPolicyNet,
    SteeringRuntime,
    desk_steer,
    encode_reference,
    evaluate_trace,
    figure_eight_trace,
    paper_scale_steer,
    read_trace,
    train_steering,
    user_input_to_target,
)
from .training import Trainer, desk_train, paper_scale_train

# a plausible standing speed per family, used when a clip is named by family
CANONICAL_SPEED = {"walk": 1.0, "run": 2.0, "hop": 0.6,
                   "squat": 0.0, "sway": 0.0, "turn": 0.7}


def _engine() -> Engine:
    return Engine(planar_biped())


def _resolve_clip(spec: str, duration: float, seed: int,
                  speed: float | None = None) -> MotionClip:
    """A clip argument is either a file path or a gait family name."""
    if spec in FAMILIES:
        v = CANONICAL_SPEED[spec] if speed is None else speed
        return generate_gait(GaitParams(spec, v, duration=duration, seed=seed))
    if os.path.exists(spec):
        return load_clip(spec)
    raise SystemExit(
        f"clip {spec!r} is neither a file nor a gait family {sorted(FAMILIES)}")


def _corpus_clips(data_dir: str | None, seed: int) -> list[MotionClip]:
    """Training clips: every .mcq under data_dir, or the built-in corpus."""
    if data_dir is None:
        entries = desk_corpus()
        if seed:
            entries = [replace(e, seed=e.seed + seed) for e in entries]
        return [generate_gait(e) for e in entries]
    names = sorted(n for n in os.listdir(data_dir) if n.endswith(".mcq"))
    if not names:
        raise SystemExit(f"no .mcq clips under {data_dir}")
    return [load_clip(os.path.join(data_dir, n)) for n in names]


def _encode_indices(codec, engine, clip: MotionClip, layers: int | None):
    """Clip -> (z, s) for the longest 4-frame-aligned prefix."""
    usable = clip.n_frames - clip.n_frames % 4
    if usable < 4:
        raise SystemExit(f"clip too short to encode: {clip.n_frames} frames")
    feats = window_features(engine, clip.window(0, usable))
    with no_grad():
        v = codec.encode(feats.T[None])
    z, s = codec.quant.quantize(v.data, active_layers=layers)
    return z[0], s[0]


def _indices_text(s: np.ndarray) -> str:
    """Flat form for single-layer sequences, tuple form otherwise."""
    return serialize_indices(s[:, 0] if s.shape[1] == 1 else s)


def _runtime(args, require_steer: bool = True) -> SteeringRuntime:
    codec = load_codec_checkpoint(args.codec)
    net = load_steering_checkpoint(args.steer) if require_steer else None
    if net is None:
        raise SystemExit("a steering checkpoint is required")
    engine = _engine()
    start = _resolve_clip(args.start, 2.0, args.seed)
    state = clip_states(start).select([0])
    return SteeringRuntime(codec, net, engine, state,
                           action_beta=args.action_beta)


# -- subcommands ---------------------------------------------------------------


def cmd_gen_data(args) -> int:
    entries = desk_corpus()
    if args.seed:
        entries = [replace(e, seed=e.seed + args.seed) for e in entries]
    os.makedirs(args.out, exist_ok=True)
    for i, e in enumerate(entries):
        save_clip(generate_gait(e), os.path.join(args.out, f"{i:03d}_{e.family}.mcq"))
    with open(os.path.join(args.out, "manifest.txt"), "w") as fh:
        fh.write(corpus_manifest(entries))
    print(f"wrote {len(entries)} clips to {args.out}")
    return 0


def cmd_train_codec(args) -> int:
    cfg = paper_scale_train() if args.preset == "paper-scale" else desk_train()
    over = {"seed": args.seed}
    if args.iterations is not None:
        over["iterations"] = args.iterations
    cfg = cfg.scaled(**over)
    clips = _corpus_clips(args.data, args.seed)
    trainer = Trainer(cfg, clips=clips)
    report = trainer.run(out_dir=args.out)
    last = report.records[-1]
    print(f"iterations: {trainer.iteration}")
    print(f"final recon: {last['recon']:.6f}  world: {last['world']:.6f}")
    print(f"checkpoint: {os.path.join(args.out, f'ckpt_{trainer.iteration:06d}.seg')}")
    return 0


def cmd_train_gpt(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    gcfg = paper_scale_gpt() if args.preset == "paper-scale" else desk_gpt()
    gcfg = gcfg.scaled(n_codebooks=codec.cfg.n_codebooks,
                       codebook_size=codec.cfg.codebook_size)
    streams = [_encode_indices(codec, engine, c, None)[1]
               for c in _corpus_clips(args.data, args.seed)]
    net = GptNet(gcfg, seed=args.seed)
    tcfg = GptTrainConfig(iterations=args.iterations, seed=args.seed)
    records = train_gpt(net, streams, tcfg)
    save_gpt_checkpoint(args.out, net)
    print(f"streams: {len(streams)}  codes: {sum(s.shape[0] for s in streams)}")
    print(f"final nll: {records[-1]['nll']:.6f}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_train_steer(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    scfg = paper_scale_steer() if args.preset == "paper-scale" else desk_steer()
    scfg = scfg.scaled(code_width=codec.cfg.code_width)
    entries = [encode_reference(codec, engine, c, scfg)
               for c in _corpus_clips(args.data, args.seed)]
    net = SteeringPolicyNet(scfg, seed=args.seed)
    tcfg = SteerTrainConfig(iterations=args.iterations, seed=args.seed)
    records = train_steering(net, codec.quant, entries, tcfg)
    save_steering_checkpoint(args.out, net)
    print(f"entries: {len(entries)}")
    print(f"final match: {records[-1]['match']:.6f}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_track(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    clip = _resolve_clip(args.clip, args.duration, args.seed, args.speed)
    if args.noise > 0.0:
        clip = add_noise(clip, args.noise, args.seed)
    sim_clip, report = track(codec, engine, clip, window=args.window,
                             action_beta=args.action_beta)
    if args.out:
        save_clip(sim_clip, args.out)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 1 if report.diverged else 0


def cmd_sample(args) -> int:
    net = load_gpt_checkpoint(args.gpt)
    rng = np.random.default_rng(args.seed)
    seq = generate(net, args.length, temperature=args.temperature, rng=rng)
    text = _indices_text(seq)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_steer_eval(args) -> int:
    runtime = _runtime(args)
    if args.trace:
        trace = read_trace(args.trace)
    else:
        trace = figure_eight_trace(duration=args.duration, speed=args.speed or 1.0)
    result = evaluate_trace(runtime, trace)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 1 if result["diverged"] else 0


def cmd_matchplay(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    clip = _resolve_clip(args.clip, args.duration, args.seed, args.speed)
    stream = latent_motion_matching(codec, engine, clip, args.theta, seed=args.seed)
    rows = np.stack([next(stream) for _ in range(args.steps)])
    print(_indices_text(rows))
    return 0


def cmd_encode(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    clip = _resolve_clip(args.clip, args.duration, args.seed, args.speed)
    _, s = _encode_indices(codec, engine, clip, args.layers)
    text = _indices_text(s)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_decode(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    if args.text is not None:
        text = args.text
    elif args.infile is not None:
        with open(args.infile) as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    s = parse_index_response(text, codec.cfg.codebook_size)
    if s.ndim == 1:
        s = s[:, None]            # layer-0 only; residual layers stay silent
    z = codec.quant.lookup(s)
    start = _resolve_clip(args.start, 2.0, args.seed)
    state = clip_states(start).select([0])
    diverged = False
    try:
        states, _ = decode_sim(codec.upsampler, codec.policy, engine, z[None],
                               state, action_beta=args.action_beta)
    except DecodeDivergence as exc:
        states, diverged = exc.states, True
    clip = states_to_clip(states, 1.0 / engine.control_dt)
    if args.out:
        save_clip(clip, args.out)
    final = clip.frames[-1]
    print(f"codes: {s.shape[0]}  frames: {clip.n_frames}  diverged: {diverged}")
    print(f"final root: [{final[0]:.4f}, {final[1]:.4f}]")
    return 1 if diverged else 0


def cmd_prompt_pack(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    engine = _engine()
    n = PACK_PRESET_N if args.n is None else args.n
    dataset = []
    rng = np.random.default_rng(args.seed)
    families = sorted(FAMILIES)
    speeds = {"walk": (0.4, 1.45), "run": (1.2, 2.8), "hop": (0.15, 1.15),
              "squat": (0.0, 0.15), "sway": (0.0, 0.15), "turn": (0.3, 1.1)}
    for i in range(n):
        fam = families[i % len(families)]
        lo, hi = speeds[fam]
        params = GaitParams(
            fam, float(rng.uniform(lo, hi)),
            float(rng.uniform(0.5, 2.2)) if fam not in ("squat", "sway")
            else float(rng.uniform(0.35, 0.9)),
            amplitude=float(rng.uniform(0.7, 1.3)),
            duration=2.0, seed=args.seed + 1000 + i)
        dataset.append((describe_gait(params), generate_gait(params)))
    pack = emit_prompt_pack(dataset, codec, engine, n=n,
                            char_budget=args.char_budget)
    write_prompt_pack(args.out, pack)
    print(f"lines: {pack.count}  mean chars/line: {pack.mean_line_chars:.1f}")
    print(f"pack: {args.out}")
    return 0


def cmd_serve(args) -> int:
    codec = load_codec_checkpoint(args.codec)
    net = load_steering_checkpoint(args.steer)
    engine = _engine()
    start = _resolve_clip(args.start, 2.0, args.seed)

    def make_runtime() -> SteeringRuntime:
        return SteeringRuntime(codec, net, engine,
                               clip_states(start).select([0]),
                               action_beta=args.action_beta)

    print(f"serving on ws://{args.host}:{args.port}")
    serve_forever(make_runtime, host=args.host, port=args.port, hz=args.hz)
    return 0


def cmd_metrics(args) -> int:
    engine = _engine()
    pred = _resolve_clip(args.pred, args.duration, args.seed)
    ref = _resolve_clip(args.ref, args.duration, args.seed)
    report = metrics(engine, pred, ref)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


# -- argument wiring -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--preset", choices=("desk", "paper-scale"), default="desk")

    p = argparse.ArgumentParser(prog="vqmotion", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext, **kw):
        sp = sub.add_parser(name, parents=[common], help=helptext, **kw)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("gen-data", cmd_gen_data, "write the gait corpus as clip files")
    sp.add_argument("--out", required=True)

    sp = add("train-codec", cmd_train_codec, "train the codec and dynamics model")
    sp.add_argument("--out", required=True)
    sp.add_argument("--data", default=None, help="directory of .mcq clips")
    sp.add_argument("--iterations", type=int, default=None)

    sp = add("train-gpt", cmd_train_gpt, "train the index-sequence model")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--data", default=None)
    sp.add_argument("--iterations", type=int, default=2000)

    sp = add("train-steer", cmd_train_steer, "distill the steering policy")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--data", default=None)
    sp.add_argument("--iterations", type=int, default=3000)

    sp = add("track", cmd_track, "re-simulate a clip through the codec")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--clip", required=True, help=".mcq path or gait family")
    sp.add_argument("--duration", type=float, default=10.0)
    sp.add_argument("--speed", type=float, default=None)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--action-beta", type=float, default=1.0)
    sp.add_argument("--out", default=None)

    sp = add("sample", cmd_sample, "sample an index sequence from the model")
    sp.add_argument("--gpt", required=True)
    sp.add_argument("--length", type=int, default=20)
    sp.add_argument("--temperature", type=float, default=1.0)
    sp.add_argument("--out", default=None)

    sp = add("steer-eval", cmd_steer_eval, "score steering against a command trace")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--steer", required=True)
    sp.add_argument("--trace", default=None, help="trace file; default figure eight")
    sp.add_argument("--duration", type=float, default=30.0)
    sp.add_argument("--speed", type=float, default=None)
    sp.add_argument("--start", default="walk")
    sp.add_argument("--action-beta", type=float, default=1.0)

    sp = add("matchplay", cmd_matchplay, "loop a clip's codes with matching jumps")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--clip", required=True)
    sp.add_argument("--duration", type=float, default=10.0)
    sp.add_argument("--speed", type=float, default=None)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--steps", type=int, default=40)

    sp = add("encode", cmd_encode, "clip to index text")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--clip", required=True)
    sp.add_argument("--duration", type=float, default=10.0)
    sp.add_argument("--speed", type=float, default=None)
    sp.add_argument("--layers", type=int, default=None)
    sp.add_argument("--out", default=None)

    sp = add("decode", cmd_decode, "index text to a simulated clip")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--text", default=None)
    sp.add_argument("--in", dest="infile", default=None)
    sp.add_argument("--start", default="walk", help="initial pose source")
    sp.add_argument("--action-beta", type=float, default=1.0)
    sp.add_argument("--out", default=None)

    sp = add("prompt-pack", cmd_prompt_pack, "emit description/index example lines")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--char-budget", type=int, default=300_000)

    sp = add("serve", cmd_serve, "stream frames to steering clients")
    sp.add_argument("--codec", required=True)
    sp.add_argument("--steer", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--hz", type=float, default=20.0)
    sp.add_argument("--start", default="walk")
    sp.add_argument("--action-beta", type=float, default=1.0)

    sp = add("metrics", cmd_metrics, "compare two clips")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--duration", type=float, default=10.0)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
