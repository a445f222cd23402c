"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal assertion
(including a failed gradient certification).
"""

import sys

import click

from .checkpoint import Checkpoint, load_checkpoint, model_from_checkpoint, save_checkpoint
from .errors import DataError, LatseqError, MismatchError
from .evaluate import evaluate_accuracy
from .lattice import build_lattice, read_lattices, write_lattices
from .model import ModelConfig
from .toytask import ToyTaskSpec, gen_toy
from .training import Hyperparams, TrainConfig, grad_check
from .training import train as run_training
from .vocab import EOS, Vocab, build_vocab, surfaces_with_reversals

GRAD_CHECK_TOLERANCE = 1e-6


@click.group()
def cli():
    """Word-lattice encoders for sequence-to-sequence translation."""


@cli.command("build-lattice")
@click.option("--segs", required=True,
              help="Comma-separated parallel tokenization files, one sentence per line.")
@click.option("--out", required=True, type=click.Path(), help="Output lattice file.")
def build_lattice_cmd(segs, out):
    """Merge parallel tokenization files into a lattice file."""
    paths = [p for p in segs.split(",") if p]
    if not paths:
        raise click.UsageError("--segs needs at least one file")
    streams = []
    for p in paths:
        with open(p, encoding="utf-8") as f:
            streams.append([line.split() for line in f])
    counts = {len(s) for s in streams}
    if len(counts) != 1:
        raise DataError("tokenization files differ in line count: %s" % sorted(counts))
    lattices = []
    for lineno, row in enumerate(zip(*streams), start=1):
        chars = "".join(row[0])
        try:
            lattices.append(build_lattice(chars, list(row)))
        except MismatchError as exc:
            raise DataError("line %d: %s" % (lineno, exc))
    with open(out, "w", encoding="utf-8") as f:
        write_lattices(lattices, f)
    click.echo("wrote %d lattices to %s" % (len(lattices), out))


@cli.command("build-vocab")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--size", default=50000, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--from-lattices", is_flag=True,
              help="Input is a lattice file; count edge surfaces and their reversals.")
def build_vocab_cmd(input_path, size, out, from_lattices):
    """Build a frequency-ranked vocabulary file."""
    if from_lattices:
        with open(input_path, encoding="utf-8") as f:
            lattices = read_lattices(f)
        stream = surfaces_with_reversals(lattices)
        vocab = build_vocab(stream, size)
    else:
        with open(input_path, encoding="utf-8") as f:
            vocab = build_vocab((tok for line in f for tok in line.split()), size)
    vocab.save(out)
    click.echo("wrote %d tokens to %s" % (len(vocab), out))


@cli.command("gen-toy")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--sentences", default=2000, show_default=True)
@click.option("--noise", default=0.3, show_default=True)
@click.option("--seed", default=11, show_default=True)
def gen_toy_cmd(out_dir, sentences, noise, seed):
    """Generate the synthetic ambiguous-segmentation corpus."""
    spec = ToyTaskSpec(sentences=sentences, noise=noise, seed=seed)
    paths = gen_toy(spec, out_dir)
    click.echo("wrote %d files to %s" % (len(paths), out_dir))


def _load_pairs(lattice_path, target_path, tgt_vocab):
    with open(lattice_path, encoding="utf-8") as f:
        lattices = read_lattices(f)
    with open(target_path, encoding="utf-8") as f:
        targets = [line.split() for line in f]
    if len(lattices) != len(targets):
        raise DataError(
            "%s has %d lattices but %s has %d target lines"
            % (lattice_path, len(lattices), target_path, len(targets))
        )
    return [
        (lat, [tgt_vocab.id(tok) for tok in tgt] + [EOS])
        for lat, tgt in zip(lattices, targets)
    ]


@cli.command("train")
@click.option("--lattices", "lattices_path", required=True, type=click.Path(exists=True))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True))
@click.option("--src-vocab", required=True, type=click.Path(exists=True))
@click.option("--tgt-vocab", required=True, type=click.Path(exists=True))
@click.option("--val-lattices", type=click.Path(exists=True))
@click.option("--val-targets", type=click.Path(exists=True))
@click.option("--cell", type=click.Choice(["gru", "swl", "dwl"]), default="dwl",
              show_default=True)
@click.option("--compose", type=click.Choice(["pool", "gate"]), default="gate",
              show_default=True)
@click.option("--embed-dim", default=320, show_default=True)
@click.option("--hidden", default=512, show_default=True)
@click.option("--lr", default=5e-4, show_default=True)
@click.option("--batch", default=80, show_default=True)
@click.option("--clip", default=1.0, show_default=True)
@click.option("--rho", default=0.99, show_default=True)
@click.option("--eps", default=1e-4, show_default=True)
@click.option("--patience", default=5, show_default=True)
@click.option("--max-epochs", default=10000, show_default=True)
@click.option("--max-updates", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def train_cmd(lattices_path, targets_path, src_vocab, tgt_vocab, val_lattices,
              val_targets, cell, compose, embed_dim, hidden, lr, batch, clip,
              rho, eps, patience, max_epochs, max_updates, seed, out_path):
    """Train a model and write the best checkpoint plus a plain-text log."""
    src = Vocab.load(src_vocab)
    tgt = Vocab.load(tgt_vocab)
    pairs = _load_pairs(lattices_path, targets_path, tgt)
    if (val_lattices is None) != (val_targets is None):
        raise click.UsageError("--val-lattices and --val-targets go together")
    if val_lattices is not None:
        val_pairs = _load_pairs(val_lattices, val_targets, tgt)
        train_pairs = pairs
    else:
        import numpy as np

        order = np.random.default_rng(seed).permutation(len(pairs))
        n_val = max(1, len(pairs) // 10)
        val_pairs = [pairs[i] for i in order[:n_val]]
        train_pairs = [pairs[i] for i in order[n_val:]]

    cfg = TrainConfig(
        model=ModelConfig(cell=cell, compose=compose, embed_dim=embed_dim, hidden=hidden),
        hyper=Hyperparams(embed_dim=embed_dim, hidden=hidden, lr=lr, batch=batch,
                          clip=clip, rmsprop_rho=rho, rmsprop_eps=eps,
                          patience_epochs=patience),
        seed=seed,
        max_epochs=max_epochs,
        max_updates=max_updates,
        log_sink=sys.stdout,
    )
    result = run_training(cfg, train_pairs, val_pairs, src, tgt)
    if result.filtered:
        click.echo("filtered %d over-length sentence pairs" % result.filtered)
    save_checkpoint(out_path, Checkpoint.from_model(result.model))
    with open(out_path + ".log", "w", encoding="utf-8") as f:
        for line in result.log_lines:
            f.write(line + "\n")
    click.echo("best val_acc %.6f after %d updates; checkpoint at %s"
               % (result.best_val_acc, result.updates, out_path))


@cli.command("decode")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--lattices", "lattices_path", required=True, type=click.Path(exists=True))
@click.option("--beam", default=1, show_default=True)
@click.option("--max-len", default=50, show_default=True)
@click.option("--length-norm/--no-length-norm", default=True, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def decode_cmd(model_path, lattices_path, beam, max_len, length_norm, out_path):
    """Decode a lattice file with a trained checkpoint."""
    ckpt = load_checkpoint(model_path)
    model, _, tgt_vocab = model_from_checkpoint(ckpt)
    with open(lattices_path, encoding="utf-8") as f:
        lattices = read_lattices(f)
    with open(out_path, "w", encoding="utf-8") as f:
        for lat in lattices:
            ids = model.decode_beam(lat, max_len=max_len, beam_width=beam,
                                    length_norm=length_norm)
            f.write(" ".join(tgt_vocab.token(i) for i in ids) + "\n")
    click.echo("wrote %d hypotheses to %s" % (len(lattices), out_path))


@cli.command("grad-check")
@click.option("--cell", type=click.Choice(["gru", "swl", "dwl"]), default="dwl",
              show_default=True)
@click.option("--compose", type=click.Choice(["pool", "gate"]), default="gate",
              show_default=True)
@click.option("--dim", default=4, show_default=True)
@click.option("--k", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
def grad_check_cmd(cell, compose, dim, k, seed):
    """Compare the analytic cell gradients against central differences."""
    err = grad_check(cell, compose_mode=compose, dim=dim, k=k, seed=seed)
    click.echo("max relative error %.3e" % err)
    if err > GRAD_CHECK_TOLERANCE:
        raise LatseqError(
            "gradient check failed: %.3e > %.0e" % (err, GRAD_CHECK_TOLERANCE)
        )


@cli.command("eval")
@click.option("--hyp", required=True, type=click.Path(exists=True))
@click.option("--ref", required=True, type=click.Path(exists=True))
def eval_cmd(hyp, ref):
    """Print corpus token accuracy of a hypothesis file against a reference."""
    click.echo("token accuracy %.6f" % evaluate_accuracy(hyp, ref))


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except DataError as exc:
        click.echo("data error: %s" % exc, err=True)
        return 2
    except (LatseqError, AssertionError) as exc:
        click.echo("error: %s" % exc, err=True)
        return 3
    except OSError as exc:
        click.echo("data error: %s" % exc, err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
