"""Command line interface for batch runs and the gateway service.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 backend error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import control as control_mod
from . import corpus as corpus_mod
from . import kb as kb_mod
from . import keywords as keywords_mod
from . import metrics as metrics_mod
from . import planner as planner_mod
from . import ranker as ranker_mod
from . import weaklabel as weaklabel_mod
from .backends import (
    ENV_EMBED_URL,
    ENV_GENERATOR_URL,
    ENV_KEYWORD_URL,
    BackendEndpoint,
    BackendSuite,
    CachingEmbedder,
    HttpEmbeddingBackend,
    HttpGeneratorBackend,
    HttpKeywordBackend,
)
from .exceptions import BackendError, ConfigError, DataFormatError, KgstoryError
from .mocks import mock_backend_suite
from .story import GenerationConfig


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_templates(path: str | None) -> dict[str, str]:
    return kb_mod.load_templates(_read(path)) if path else kb_mod.default_templates()


def _load_stopwords(path: str | None) -> frozenset[str]:
    return keywords_mod.load_stopwords(_read(path)) if path else keywords_mod.default_stopwords()


def _load_index(kb_path: str, templates_path: str | None) -> kb_mod.KnowledgeIndex:
    templates = _load_templates(templates_path)
    triples = kb_mod.parse_triples(_read(kb_path), templates)
    return kb_mod.build_index(triples, templates)


def _build_backends(mock, embed_url, kw_url, gen_url, seed, gen_mode) -> BackendSuite:
    if mock:
        return mock_backend_suite(seed=seed, generator_mode=gen_mode)
    missing = [
        flag
        for flag, value in (("--embed-url", embed_url), ("--kw-url", kw_url), ("--gen-url", gen_url))
        if not value
    ]
    if missing:
        raise click.UsageError(f"pass --mock or provide {', '.join(missing)}")
    return BackendSuite(
        embedder=HttpEmbeddingBackend(BackendEndpoint("embed", embed_url)),
        keyword_predictor=HttpKeywordBackend(BackendEndpoint("keywords", kw_url)),
        generator=HttpGeneratorBackend(BackendEndpoint("generate", gen_url)),
    )


def _resolve_heads(heads_path, backends, margin, seed) -> ranker_mod.RankerHeads:
    if heads_path:
        return ranker_mod.load_heads(heads_path)
    # untrained heads: probe the embedder for its dimensionality
    dim = backends.embedder.embed(["dimension probe"]).shape[1]
    return ranker_mod.init_heads(dim, d_out=min(128, 8 * dim), margin=margin, seed=seed)


def backend_options(fn):
    fn = click.option("--mock", is_flag=True, help="Use the built-in deterministic mock backends.")(fn)
    fn = click.option("--embed-url", envvar=ENV_EMBED_URL, default=None)(fn)
    fn = click.option("--kw-url", envvar=ENV_KEYWORD_URL, default=None)(fn)
    fn = click.option("--gen-url", envvar=ENV_GENERATOR_URL, default=None)(fn)
    return fn


@click.group()
def cli():
    """Knowledge-guided controllable story generation."""


@cli.group()
def index():
    """Knowledge base index commands."""


@index.command("build")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--templates", "templates_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def index_build(kb_path, templates_path, out_path):
    """Build the inverted index and write it as JSON."""
    idx = _load_index(kb_path, templates_path)
    payload = {
        "version": 1,
        "sentences": [{"triple_id": s.triple_id, "text": s.text} for s in idx.sentences],
        "postings": idx.postings,
    }
    Path(out_path).write_text(json.dumps(payload) + "\n", encoding="utf-8")
    click.echo(f"indexed {len(idx)} knowledge sentences, {len(idx.postings)} tokens")


@cli.group()
def label():
    """Weak-supervision pseudo-label commands."""


@label.command("build")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--templates", "templates_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--stopwords", "stopwords_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--stories", "stories_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "top_n", default=10, show_default=True, help="Positives kept per step.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True)
@backend_options
def label_build(kb_path, templates_path, stopwords_path, stories_path, top_n, out_path, seed, mock, embed_url, kw_url, gen_url):
    """Label every story step with its most context-similar knowledge."""
    idx = _load_index(kb_path, templates_path)
    stopwords = _load_stopwords(stopwords_path)
    backends = _build_backends(mock, embed_url, kw_url, gen_url, seed, "sample")
    embedder = CachingEmbedder(backends.embedder)
    stories = corpus_mod.load_stories(_read(stories_path))
    labels = []
    for story in stories:
        sentences = list(story.sentences)
        for i, sentence in enumerate(sentences, start=1):
            labels.append(
                weaklabel_mod.build_pseudo_label(
                    sentences[i - 2] if i >= 2 else None,
                    sentence,
                    idx,
                    embedder,
                    stopwords,
                    n=top_n,
                    story_id=story.story_id,
                    step_index=i,
                )
            )
    Path(out_path).write_text(weaklabel_mod.dump_labels(labels), encoding="utf-8")
    click.echo(f"wrote {len(labels)} pseudo-labels for {len(stories)} stories")


@cli.group()
def ranker():
    """Contextual knowledge ranker commands."""


@ranker.command("train")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--templates", "templates_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--stopwords", "stopwords_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--stories", "stories_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--heads", "heads_path", required=True, type=click.Path(dir_okay=False), help="Checkpoint output path.")
@click.option("--report", "report_path", default=None, type=click.Path(dir_okay=False))
@click.option("--n", "top_n", default=10, show_default=True)
@click.option("--negatives", default=40, show_default=True)
@click.option("--pairs", default=50, show_default=True)
@click.option("--d-out", default=128, show_default=True)
@click.option("--margin", default=5.0, show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--lr", default=0.01, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@backend_options
def ranker_train(kb_path, templates_path, stopwords_path, stories_path, heads_path, report_path, top_n, negatives, pairs, d_out, margin, epochs, lr, batch_size, seed, mock, embed_url, kw_url, gen_url):
    """Train W1/W2 with the hinge ranking loss over pseudo-label pairs."""
    idx = _load_index(kb_path, templates_path)
    stopwords = _load_stopwords(stopwords_path)
    backends = _build_backends(mock, embed_url, kw_url, gen_url, seed, "sample")
    embedder = CachingEmbedder(backends.embedder)
    stories = corpus_mod.load_stories(_read(stories_path))
    data = ranker_mod.build_training_set(
        stories,
        idx,
        embedder,
        stopwords,
        n_positives=top_n,
        negatives_per_context=negatives,
        pairs_per_context=pairs,
        rng_seed=seed,
    )
    if not data:
        raise DataFormatError("no training pairs could be built from the given corpus")
    d_in = data[0].context_embedding.shape[0]
    heads = ranker_mod.init_heads(d_in, d_out=d_out, margin=margin, seed=seed)
    heads, trace = ranker_mod.train(
        heads, data, epochs=epochs, learning_rate=lr, batch_size=batch_size, rng_seed=seed
    )
    ranker_mod.save_heads(heads, heads_path)
    report = ranker_mod.format_training_report(trace)
    if report_path:
        Path(report_path).write_text(report, encoding="utf-8")
    else:
        click.echo(report, nl=False)
    click.echo(f"trained on {len(data)} pairs; final mean loss {trace[-1]:.6f}")


def _make_pipeline(kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, mock, embed_url, kw_url, gen_url, gen_mode="sample"):
    idx = _load_index(kb_path, templates_path)
    backends = _build_backends(mock, embed_url, kw_url, gen_url, seed, gen_mode)
    heads = _resolve_heads(heads_path, backends, margin=5.0, seed=seed)
    config = GenerationConfig(
        knowledge_per_step=top_n, top_k=top_k, temperature=temperature, mode=mode, seed=seed
    )
    # stopwords only matter for the mock keyword predictor, which loads its own
    _ = stopwords_path
    return planner_mod.StoryPipeline(idx, heads, backends, config=config)


generation_options = [
    click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--templates", "templates_path", default=None, type=click.Path(exists=True, dir_okay=False)),
    click.option("--stopwords", "stopwords_path", default=None, type=click.Path(exists=True, dir_okay=False)),
    click.option("--heads", "heads_path", default=None, type=click.Path(exists=True, dir_okay=False)),
    click.option("--n", "top_n", default=10, show_default=True, help="Knowledge sentences per step."),
    click.option("--top-k", default=40, show_default=True),
    click.option("--temperature", default=0.7, show_default=True),
    click.option("--mode", default="dynamic", type=click.Choice(["dynamic", "static"]), show_default=True),
    click.option("--seed", default=0, show_default=True),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@cli.command("generate")
@add_options(generation_options)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False), help="First sentences, one per line.")
@click.option("--length", default=5, show_default=True, help="Target story length.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--plan-log", "plan_log_path", default=None, type=click.Path(dir_okay=False))
@click.option("--logprobs", "logprobs_path", default=None, type=click.Path(dir_okay=False))
@backend_options
def generate(kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, input_path, length, out_path, plan_log_path, logprobs_path, mock, embed_url, kw_url, gen_url):
    """Generate one story per input first sentence (dynamic or static)."""
    pipeline = _make_pipeline(
        kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, mock, embed_url, kw_url, gen_url
    )
    first_sentences = [line.strip() for line in _read(input_path).splitlines() if line.strip()]
    story_lines, plan_blocks, logprob_rows = [], [], []
    for story_no, first in enumerate(first_sentences):
        state, logprobs = pipeline.generate_story_with_logprobs(first, target_length=length)
        story_lines.append(planner_mod.format_story_line(state))
        plan_blocks.append(f"# story {story_no}\n" + planner_mod.format_plan_log(state))
        logprob_rows.append((str(story_no), [lp for step in logprobs for lp in step]))
    Path(out_path).write_text("\n".join(story_lines) + "\n", encoding="utf-8")
    if plan_log_path:
        Path(plan_log_path).write_text("".join(plan_blocks), encoding="utf-8")
    if logprobs_path:
        Path(logprobs_path).write_text(metrics_mod.dump_logprobs(logprob_rows), encoding="utf-8")
    click.echo(f"generated {len(story_lines)} stories")


@cli.group()
def control():
    """Controllability harness commands."""


@control.command("antonym")
@add_options(generation_options)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False), help="First sentences, one per line.")
@click.option("--lexicon", "lexicon_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--length", default=5, show_default=True)
@click.option("--out", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--controlled-out", "controlled_path", default=None, type=click.Path(dir_okay=False))
@backend_options
def control_antonym(kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, input_path, lexicon_path, length, report_path, controlled_path, mock, embed_url, kw_url, gen_url):
    """Generate stories, then rerun each from its first antonym-bearing keyword."""
    pipeline = _make_pipeline(
        kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, mock, embed_url, kw_url, gen_url
    )
    lexicon = (
        control_mod.load_antonym_lexicon(_read(lexicon_path))
        if lexicon_path
        else control_mod.default_antonyms()
    )
    first_sentences = [line.strip() for line in _read(input_path).splitlines() if line.strip()]
    rows, controlled_lines = [], []
    uncontrollable = 0
    for story_no, first in enumerate(first_sentences):
        original = pipeline.generate_story(first, target_length=length)
        run = control_mod.antonym_rerun(original, lexicon, pipeline, rng_seed=seed + story_no)
        rows.append((str(story_no), run))
        if run is None:
            uncontrollable += 1
        else:
            controlled_lines.append(planner_mod.format_story_line(run.controlled))
    Path(report_path).write_text(control_mod.format_control_report(rows), encoding="utf-8")
    if controlled_path:
        Path(controlled_path).write_text("\n".join(controlled_lines) + ("\n" if controlled_lines else ""), encoding="utf-8")
    click.echo(
        f"controlled {len(rows) - uncontrollable}/{len(rows)} stories ({uncontrollable} without an antonym pivot)"
    )


@cli.group("eval")
def eval_group():
    """Evaluation commands."""


@eval_group.command("metrics")
@click.option("--stories", "stories_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--logprobs", "logprobs_path", default=None, type=click.Path(exists=True, dir_okay=False))
def eval_metrics(stories_path, logprobs_path):
    """Report repeat-4, distinct-4, and optional perplexity for a story file."""
    lines = [line for line in _read(stories_path).splitlines() if line.strip()]
    if not lines:
        raise DataFormatError("story file is empty")
    stories = [metrics_mod.story_tokens(line.split("\t")) for line in lines]
    logprobs = metrics_mod.load_logprobs(_read(logprobs_path)) if logprobs_path else None
    report = metrics_mod.evaluate(stories, logprobs)
    click.echo(metrics_mod.format_report(report))


@cli.command("serve")
@add_options(generation_options)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--snapshot", "snapshot_path", default=None, type=click.Path(dir_okay=False))
@backend_options
def serve(kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, host, port, ui_dir, snapshot_path, mock, embed_url, kw_url, gen_url):
    """Run the interactive session gateway."""
    import uvicorn

    from .service import create_app

    pipeline = _make_pipeline(
        kb_path, templates_path, stopwords_path, heads_path, top_n, top_k, temperature, mode, seed, mock, embed_url, kw_url, gen_url
    )
    app = create_app(pipeline, ui_dir=ui_dir, snapshot_path=snapshot_path)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except (DataFormatError, ConfigError, FileNotFoundError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    except KgstoryError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
