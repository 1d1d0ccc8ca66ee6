"""Command-line entry points for every pipeline stage plus the service.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric divergence.
Every flag can also come from an `AFFORDANCE_<COMMAND>_<FLAG>` environment
variable or from a JSON file passed as `--config` (flags win).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import AffordanceError, TrainingDivergedError
from .manifest import write_manifest
from .mining import FilterThresholds
from .model import TrainConfig


def _load_default_map(ctx, param, value):
    if value is None:
        return None
    doc = json.loads(Path(value).read_text())
    ctx.default_map = doc
    return value


@click.group()
@click.option("--config", callback=_load_default_map, expose_value=False,
              is_eager=True, type=click.Path(exists=True),
              help="JSON file of per-command option defaults.")
def cli():
    """Pose affordance pipeline: mine scenes, cluster a pose vocabulary,
    train the classifier and VAE, generate and score poses, evaluate, serve."""


def train_options(fn):
    fn = click.option("--hidden", default=512, show_default=True)(fn)
    fn = click.option("--latent-dim", default=30, show_default=True)(fn)
    fn = click.option("--lr", default=2e-4, show_default=True)(fn)
    fn = click.option("--lr-decay", default=1.0, show_default=True)(fn)
    fn = click.option("--beta1", default=0.5, show_default=True)(fn)
    fn = click.option("--beta2", default=0.999, show_default=True)(fn)
    fn = click.option("--epochs", default=50, show_default=True)(fn)
    fn = click.option("--batch-size", default=64, show_default=True)(fn)
    fn = click.option("--lam", default=1.0, show_default=True,
                      help="weight on the KL term")(fn)
    return fn


def _train_config(hidden, latent_dim, lr, lr_decay, beta1, beta2, epochs,
                  batch_size, lam) -> TrainConfig:
    cfg = TrainConfig(hidden=hidden, latent_dim=latent_dim, lr=lr, lr_decay=lr_decay,
                      beta1=beta1, beta2=beta2, epochs=epochs,
                      batch_size=batch_size, lam=lam)
    cfg.validate()
    return cfg


@cli.command()
@click.option("--out", required=True, type=click.Path(), help="corpus directory")
@click.option("--seed", default=0, show_default=True)
@click.option("--shows", default="alpha,beta,gamma", show_default=True)
@click.option("--scenes-per-show", default=5, show_default=True)
def synth(out, seed, shows, scenes_per_show):
    """Build the bundled synthetic mining corpus."""
    from .synthetic import build_corpus

    manifest = build_corpus(out, seed=seed, shows=tuple(shows.split(",")),
                            scenes_per_show=scenes_per_show)
    click.echo(f"wrote corpus with {len(manifest['frames'])} frames to {out}")


@cli.command()
@click.option("--corpus", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--tau-face", default=20.0, show_default=True)
@click.option("--tau-person", default=0.5, show_default=True)
@click.option("--tau-empty", default=0.6, show_default=True)
@click.option("--feat-dim", default=64, show_default=True)
@click.option("--featurizer-seed", default=0, show_default=True)
@click.option("--min-similarity", default=0.98, show_default=True,
              help="retrieval similarity floor for global transfer")
@click.option("--auto-accept", is_flag=True,
              help="mark in-frame hypotheses accepted (synthetic corpora only)")
def mine(corpus, out, tau_face, tau_person, tau_empty, feat_dim,
         featurizer_seed, min_similarity, auto_accept):
    """Filter empty scenes and transfer poses into them."""
    from .pipeline import run_mine

    thresholds = FilterThresholds(tau_face, tau_person, tau_empty)
    summary = run_mine(corpus, out, thresholds=thresholds, feat_dim=feat_dim,
                       featurizer_seed=featurizer_seed,
                       retrieval_min_similarity=min_similarity,
                       auto_accept=auto_accept)
    write_manifest(out, "mine",
                   dict(tau_face=tau_face, tau_person=tau_person,
                        tau_empty=tau_empty, feat_dim=feat_dim,
                        featurizer_seed=featurizer_seed,
                        min_similarity=min_similarity, auto_accept=auto_accept),
                   [Path(corpus) / "corpus.json"])
    click.echo(json.dumps(summary))


@cli.command()
@click.option("--dataset", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--k", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--test-show", default=None,
              help="exclude this show's poses from vocabulary building")
def cluster(dataset, vocab_path, k, seed, test_show):
    """Build the K-medoid pose vocabulary and label the dataset."""
    from .pipeline import run_cluster

    if k < 1:
        raise click.UsageError("--k must be >= 1")
    summary = run_cluster(dataset, vocab_path, k=k, seed=seed, test_show=test_show)
    write_manifest(vocab_path, "cluster",
                   dict(k=k, seed=seed, test_show=test_show), [dataset])
    click.echo(json.dumps(summary))


@cli.command("train-classifier")
@click.option("--dataset", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--test-show", default=None)
@train_options
def train_classifier_cmd(dataset, vocab_path, out, seed, test_show, **train_kw):
    """Train the pose-class classifier."""
    from .pipeline import run_train_classifier

    cfg = _train_config(**train_kw)
    summary = run_train_classifier(dataset, vocab_path, out, config=cfg,
                                   seed=seed, test_show=test_show)
    write_manifest(out, "train-classifier",
                   dict(seed=seed, test_show=test_show, **train_kw),
                   [dataset, vocab_path])
    click.echo(json.dumps(summary))


@cli.command("train-vae")
@click.option("--dataset", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--test-show", default=None)
@click.option("--delta", default=None, type=float,
              help="plausibility threshold stored in the checkpoint")
@train_options
def train_vae_cmd(dataset, vocab_path, out, seed, test_show, delta, **train_kw):
    """Train the conditional VAE over scale/deformation."""
    from .pipeline import run_train_vae

    cfg = _train_config(**train_kw)
    summary = run_train_vae(dataset, vocab_path, out, config=cfg, seed=seed,
                            test_show=test_show, delta=delta)
    write_manifest(out, "train-vae",
                   dict(seed=seed, test_show=test_show, delta=delta, **train_kw),
                   [dataset, vocab_path])
    click.echo(json.dumps(summary))


def bundle_options(fn):
    fn = click.option("--dataset", required=True, type=click.Path())(fn)
    fn = click.option("--images", "images_root", required=True, type=click.Path())(fn)
    fn = click.option("--vocab", "vocab_path", required=True, type=click.Path())(fn)
    fn = click.option("--classifier", "classifier_path", required=True,
                      type=click.Path())(fn)
    fn = click.option("--vae", "vae_path", required=True, type=click.Path())(fn)
    return fn


def _bundle(dataset, images_root, vocab_path, classifier_path, vae_path):
    from .pipeline import InferenceBundle

    return InferenceBundle(vocab_path=vocab_path, classifier_path=classifier_path,
                           vae_path=vae_path, dataset_path=dataset,
                           images_root=images_root)


def _parse_point(text):
    try:
        x, y = text.split(",")
        return float(x), float(y)
    except ValueError:
        raise click.UsageError(f"point must be 'x,y', got {text!r}")


@cli.command()
@bundle_options
@click.option("--scene", required=True)
@click.option("--point", required=True, help="x,y pixel location")
@click.option("--samples", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path(), help="write JSON here")
def generate(dataset, images_root, vocab_path, classifier_path, vae_path,
             scene, point, samples, seed, out):
    """Sample poses at a scene location."""
    from .pipeline import run_generate

    bundle = _bundle(dataset, images_root, vocab_path, classifier_path, vae_path)
    doc = run_generate(bundle, scene, _parse_point(point), n_samples=samples, seed=seed)
    text = json.dumps(doc, separators=(",", ":"))
    if out:
        Path(out).write_text(text + "\n")
        write_manifest(out, "generate", dict(scene=scene, point=point,
                                             samples=samples, seed=seed),
                       [dataset, vocab_path, classifier_path, vae_path])
    click.echo(text)


@cli.command()
@bundle_options
@click.option("--scene", required=True)
@click.option("--candidate", "candidate_path", required=True,
              type=click.Path(exists=True),
              help="JSON file with a 17x2 'joints' array")
@click.option("--point", default=None, help="x,y; defaults to the candidate bbox center")
@click.option("--m", default=10, show_default=True)
@click.option("--delta", default=25.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def score(dataset, images_root, vocab_path, classifier_path, vae_path,
          scene, candidate_path, point, m, delta, seed):
    """Score how plausible a candidate pose is at a location."""
    from .pipeline import run_score
    from .pose import Pose

    doc = json.loads(Path(candidate_path).read_text())
    joints = doc["joints"] if isinstance(doc, dict) else doc
    bundle = _bundle(dataset, images_root, vocab_path, classifier_path, vae_path)
    pt = _parse_point(point) if point else tuple(Pose(joints).bbox_center)
    result = run_score(bundle, scene, pt, joints, m=m, delta=delta, seed=seed)
    click.echo(json.dumps(result, separators=(",", ":")))


@cli.command()
@bundle_options
@click.option("--test-show", required=True)
@click.option("--per-positive", default=2.47, show_default=True,
              help="synthesized negatives per positive")
@click.option("--m", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--delta", default=None, type=float)
@click.option("--out", required=True, type=click.Path(),
              help="report stem; writes .json, .txt, and .pr.csv")
def evaluate(dataset, images_root, vocab_path, classifier_path, vae_path,
             test_show, per_positive, m, seed, delta, out):
    """Top-k classification plus the plausibility PR protocol."""
    from .pipeline import run_evaluate

    bundle = _bundle(dataset, images_root, vocab_path, classifier_path, vae_path)
    report, extras = run_evaluate(dataset, bundle, test_show=test_show,
                                  per_positive=per_positive, m=m, seed=seed,
                                  delta=delta)
    out = Path(out)
    json_path = out.with_suffix(".json")
    json_path.write_text(report.to_json() + "\n")
    out.with_suffix(".txt").write_text(report.to_text() + "\n")
    out.with_suffix(".pr.csv").write_text(report.pr_csv())
    write_manifest(json_path, "evaluate",
                   dict(test_show=test_show, per_positive=per_positive, m=m,
                        seed=seed, delta=extras["delta"]),
                   [dataset, vocab_path, classifier_path, vae_path])
    click.echo(report.to_text())
    click.echo(json.dumps({"average_precision": report.average_precision,
                           "prevalence": report.prevalence, **extras}))


@cli.command()
@click.option("--dataset", required=True, type=click.Path())
@click.option("--images", "images_root", default=None, type=click.Path())
@click.option("--vocab", "vocab_path", default=None, type=click.Path())
@click.option("--classifier", "classifier_path", default=None, type=click.Path())
@click.option("--vae", "vae_path", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--delta", default=25.0, show_default=True)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path())
def serve(dataset, images_root, vocab_path, classifier_path, vae_path,
          host, port, seed, delta, frontend_dir):
    """Run the annotation + prediction HTTP service."""
    import uvicorn

    from .server import ServerConfig, create_app

    app = create_app(ServerConfig(
        dataset=dataset, images_root=images_root, vocab=vocab_path,
        classifier=classifier_path, vae=vae_path, seed=seed, delta=delta,
        frontend_dir=frontend_dir))
    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, auto_envvar_prefix="AFFORDANCE")
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except TrainingDivergedError as exc:
        click.echo(f"numeric divergence: {exc}", err=True)
        return 3
    except (AffordanceError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
