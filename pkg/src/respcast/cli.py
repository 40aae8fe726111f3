"""Command-line interface for the forecasting pipeline."""

from __future__ import annotations

import json
import os
import sys

import click

from .config import ConfigError, load_config
from .corpus import Corpus
from .dense_index import DenseIndex
from .engine import ForecastRequest
from .gateways import EmbeddingRequest, GatewayError
from .ideology import TrainConfig, InteractionGraph, TrainingError, train_topic_embeddings
from .knowledge import ExtractionError, KnowledgeError, KnowledgeStore, NewsArticle
from .metrics import MetricError, evaluate_responses
from .runtime import build_chat_gateway, build_embedding_gateway, build_engine, load_corpus
from .sparse_index import SparseEncoderProfile, SparseIndex, encode_sparse


def _load(config_path: str | None):
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


def _emit(payload: dict, as_json: bool, human: str) -> None:
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(human)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML config file.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Community response forecasting pipeline."""
    ctx.obj = {"config_path": config_path}


@main.command()
@click.argument("posts_file", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def ingest(ctx: click.Context, posts_file: str, as_json: bool) -> None:
    """Ingest post records (JSON lines) into the post store."""
    config = _load(ctx.obj["config_path"])
    corpus = load_corpus(config.storage.posts)
    with open(posts_file, encoding="utf-8") as fh:
        records = [line for line in fh if line.strip()]
    stats = corpus.ingest_posts(records)
    os.makedirs(os.path.dirname(config.storage.posts) or ".", exist_ok=True)
    with open(config.storage.posts, "a", encoding="utf-8") as fh:
        accepted_ids = {p.id for p in corpus.posts()}
        for line in records:
            row = json.loads(line)
            if row.get("id") in accepted_ids:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    _emit(
        {
            "accepted": stats.docs,
            "rejected": len(stats.rejected),
            "orphans": len(stats.orphans),
        },
        as_json,
        f"accepted {stats.docs}, rejected {len(stats.rejected)}, orphans {len(stats.orphans)}",
    )


@main.command("build-index")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def build_index(ctx: click.Context, as_json: bool) -> None:
    """Embed every augmented post and write the dense index snapshot."""
    config = _load(ctx.obj["config_path"])
    corpus = load_corpus(config.storage.posts)
    gateway = build_embedding_gateway(config.embedding_gateway)
    index = DenseIndex(dimension=config.embedding_gateway.dimension)
    try:
        for post in sorted(corpus.posts(), key=lambda p: p.id):
            doc = corpus.augment(post.id)
            vector = gateway.embed_dense(EmbeddingRequest(text=doc.rendered))
            index.insert(post.id, vector, topic=doc.topic, timestamp=doc.timestamp)
    except GatewayError as exc:
        raise click.ClickException(f"embedding failed: {exc}")
    os.makedirs(os.path.dirname(config.storage.dense_index) or ".", exist_ok=True)
    index.save(config.storage.dense_index)
    _emit({"indexed": len(index)}, as_json, f"indexed {len(index)} posts")


@main.command("ingest-news")
@click.argument("articles_file", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def ingest_news(ctx: click.Context, articles_file: str, as_json: bool) -> None:
    """Ingest news articles and rebuild the news sparse index."""
    config = _load(ctx.obj["config_path"])
    store = _load_knowledge(config)
    added = 0
    with open(articles_file, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                article = NewsArticle(**json.loads(line))
                added += len(store.ingest_article(article))
            except (TypeError, ValueError, KnowledgeError) as exc:
                click.echo(f"skipped article: {exc}", err=True)
    _save_knowledge(config, store)
    index = SparseIndex()
    profile = SparseEncoderProfile()
    for snippet in store.snippets():
        index.insert(snippet.id, encode_sparse(snippet.text, profile), timestamp=snippet.published_at)
    os.makedirs(os.path.dirname(config.storage.news_index) or ".", exist_ok=True)
    index.save(config.storage.news_index)
    _emit(
        {"snippets_added": added, "snippets_indexed": len(index)},
        as_json,
        f"added {added} snippets, index now {len(index)} docs",
    )


@main.command("extract-kg")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def extract_kg(ctx: click.Context, as_json: bool) -> None:
    """Run LLM triple extraction over stored news articles."""
    config = _load(ctx.obj["config_path"])
    store = _load_knowledge(config)
    chat = build_chat_gateway(config.chat_gateway)
    extracted, dropped = 0, 0
    for article in store.articles():
        try:
            result = store.extract_triples(article, chat)
        except ExtractionError as exc:
            click.echo(f"extraction failed: {exc}", err=True)
            continue
        extracted += len(result.triples)
        dropped += result.dropped_count
    _save_knowledge(config, store)
    _emit(
        {"triples": extracted, "dropped": dropped},
        as_json,
        f"extracted {extracted} triples, dropped {dropped} malformed items",
    )


@main.command("build-chunks")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def build_chunks(ctx: click.Context, as_json: bool) -> None:
    """Build entity-neighborhood chunks and the kg sparse index."""
    config = _load(ctx.obj["config_path"])
    store = _load_knowledge(config)
    chunks = store.build_neighborhood_chunks()
    index = SparseIndex()
    profile = SparseEncoderProfile()
    for chunk in chunks:
        index.insert(
            chunk.id,
            encode_sparse(chunk.rendered, profile),
            timestamp=chunk.earliest_timestamp,
        )
    os.makedirs(os.path.dirname(config.storage.kg_index) or ".", exist_ok=True)
    index.save(config.storage.kg_index)
    _emit({"chunks": len(chunks)}, as_json, f"built {len(chunks)} chunks")


@main.command("train-ideology")
@click.option("--topic", default=None, help="Train one topic only (default: all).")
@click.option("--epochs", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def train_ideology(ctx: click.Context, topic: str | None, epochs: int, seed: int, as_json: bool) -> None:
    """Train per-topic ideological embeddings from the interaction graph."""
    config = _load(ctx.obj["config_path"])
    corpus = load_corpus(config.storage.posts)
    topics = [topic] if topic else corpus.topics()
    os.makedirs(config.storage.ideology_dir, exist_ok=True)
    trained = {}
    for name in topics:
        edges = corpus.interaction_edges(name)
        if not edges:
            click.echo(f"topic {name!r}: no interaction edges, skipped", err=True)
            continue
        try:
            embedding = train_topic_embeddings(
                InteractionGraph.from_edges(edges, topic=name),
                TrainConfig(epochs=epochs, seed=seed),
            )
        except TrainingError as exc:
            raise click.ClickException(f"training failed for topic {name!r}: {exc}")
        path = os.path.join(config.storage.ideology_dir, f"{_safe_name(name)}.jsonl")
        embedding.export_jsonl(path)
        trained[name] = embedding.loss_trace[-1]
    _emit(
        {"topics": {k: v for k, v in trained.items()}},
        as_json,
        "\n".join(f"{k}: final loss {v:.6f}" for k, v in trained.items()) or "nothing trained",
    )


@main.command()
@click.option("--post", "post_text", required=True, help="Post text to forecast responses for.")
@click.option("--m", "m_total", default=30, show_default=True)
@click.option("--topic", "topic_hint", default=None)
@click.option("--as-of", "as_of", type=float, default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def forecast(
    ctx: click.Context,
    post_text: str,
    m_total: int,
    topic_hint: str | None,
    as_of: float | None,
    as_json: bool,
) -> None:
    """Forecast community responses to a (real or hypothetical) post."""
    config = _load(ctx.obj["config_path"])
    engine = build_engine(config)
    try:
        report = engine.forecast(
            ForecastRequest(
                post_text=post_text, m_total=m_total, topic_hint=topic_hint, as_of=as_of
            )
        )
    except (GatewayError, ValueError) as exc:
        raise click.ClickException(str(exc))
    payload = report.to_dict()
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
        return
    click.echo(f"status: {report.status}")
    click.echo(f"communities: {len(report.communities)}")
    for response in report.responses:
        click.echo(f"[{response.community_id}] {response.text}")


@main.command()
@click.option("--forecast", "report_path", required=True, type=click.Path(exists=True))
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def evaluate(ctx: click.Context, report_path: str, real_path: str, as_json: bool) -> None:
    """Score a forecast report against held-out real responses."""
    config = _load(ctx.obj["config_path"])
    with open(report_path, encoding="utf-8") as fh:
        report = json.load(fh)
    predicted = [r["text"] for r in report.get("responses", [])]
    real_texts, popularity = [], []
    with open(real_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            real_texts.append(row["text"])
            popularity.append(int(row.get("popularity", 0)))
    try:
        result = evaluate_responses(
            predicted,
            real_texts,
            build_embedding_gateway(config.embedding_gateway),
            build_chat_gateway(config.chat_gateway),
            real_popularity=popularity,
            reduced_dim=config.community.reduced_dim,
            seed=config.community.seed,
            min_cluster_size=config.community.min_cluster_size,
            min_samples=config.community.min_samples,
            rule=config.evaluation.membership_rule,
        )
    except (MetricError, GatewayError) as exc:
        raise click.ClickException(str(exc))
    payload = result.to_dict()
    _emit(
        payload,
        as_json,
        "\n".join(f"{key}: {value}" for key, value in payload.items()),
    )


@main.command()
@click.pass_context
def serve(ctx: click.Context) -> None:
    """Run the HTTP service."""
    from .service import serve as run_service

    config = _load(ctx.obj["config_path"])
    run_service(config)


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name) or "topic"


def _load_knowledge(config) -> KnowledgeStore:
    if os.path.exists(config.storage.articles) and os.path.exists(config.storage.triples):
        return KnowledgeStore.load(config.storage.articles, config.storage.triples)
    store = KnowledgeStore()
    if os.path.exists(config.storage.articles):
        with open(config.storage.articles, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    store.ingest_article(NewsArticle(**json.loads(line)))
    return store


def _save_knowledge(config, store: KnowledgeStore) -> None:
    for path in (config.storage.articles, config.storage.triples):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    store.save(config.storage.articles, config.storage.triples)


if __name__ == "__main__":
    main()
