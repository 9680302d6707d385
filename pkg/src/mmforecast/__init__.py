"""Multimodal asset-price forecasting: candlestick return windows fused with
aggregated news-text embeddings, plus the models and backtest machinery."""

__version__ = "0.1.0"

from .marketdata import (
    Candle,
    CandleSeries,
    ReturnSeries,
    SeriesStats,
    compute_returns,
    describe,
    load_candles,
    parse_candles,
    reconstruct_prices,
)
from .newscorpus import (
    CompanyRecord,
    KeywordSet,
    NewsArticle,
    length_stats,
    match_articles,
    parse_news,
    parse_registry,
    tfidf_keywords,
)
from .embedding import (
    AggregationMode,
    EmbeddingProvider,
    EmbeddingRecord,
    aggregate,
    hash_embed,
    hash_embed_corpus,
    read_embedding_file,
    write_embedding_file,
    zero_vector,
)
from .dedup import (
    LabeledPair,
    PairClassifier,
    filter_duplicates,
    pair_features,
    train_pair_classifier,
)
from .features import (
    AlignmentConfig,
    FeatureRow,
    align_news,
    build_rows,
    read_feature_file,
    split_by_date,
    write_feature_file,
)
from .models import (
    DecisionTreeModel,
    GbtModel,
    KnnModel,
    LstmModel,
    OlsModel,
    RandomForestModel,
    TrainConfig,
    fit_baseline,
    load_model,
    lstm_forward,
    save_model,
    train_lstm,
)
from .evaluation import (
    BacktestReport,
    MetricSet,
    direction_accuracy,
    mae,
    mape,
    metric_set,
    pointwise_prices,
    r2,
)
from .backtest import run_backtest, report_json_bytes
from .config import PipelineConfig, load_config
