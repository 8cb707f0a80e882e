"""outseq: sequence-labeling toolkit for clinical outcome phrase extraction.

Parses expert inline annotations over trial abstracts, converts them to a BIO
column corpus, trains a cost-sensitive word+POS tagger (linear or BiLSTM
encoder, softmax or linear-chain CRF head) on frozen embeddings, and scores
predictions both token-wise and with strict full-phrase exact matching.
"""

__version__ = "0.1.0"

from .annotate import (
    AnnotatedAbstract,
    AnnotationDirective,
    OutcomeSpan,
    ShareDirective,
    expand_contiguous,
    parse_abstract,
    strip_connectives,
)
from .corpus import (
    BioLabel,
    CorpusSplit,
    TokenizedSentence,
    abstract_to_sentences,
    compute_stats,
    read_column_file,
    spans_from_bio,
    split_corpus,
    to_bio,
    write_column_file,
)
from .evaluate import length_accuracy, strict_metrics, token_metrics
from .features import (
    EmbeddingStore,
    PcaTransform,
    PosEmbeddingTable,
    apply_pca,
    fit_pca,
    load_embeddings,
    token_features,
)
from .tagger import (
    BiLstmEncoder,
    CrfHead,
    LabelVocabulary,
    LinearEncoder,
    SoftmaxHead,
    TaggerModel,
    crf_log_partition,
    crf_nll,
    predict,
    viterbi,
)
from .taxonomy import OutcomeDomain, UnknownDomainSymbol
from .training import (
    ModelConfig,
    TrainConfig,
    compute_label_weights,
    focal_scale,
    train,
    undersample,
)
