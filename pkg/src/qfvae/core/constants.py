"""Constants and default values for qfvae."""

# Directory names under the output root
CORPUS_DIR = "corpus"
RUNS_DIR = "runs"
REPORTS_DIR = "reports"

# File names
TRAIN_CORPUS_FILE = "train.qfvc"
TEST_CORPUS_FILE = "test.qfvc"
STAGE1_CHECKPOINT_FILE = "stage1.qfvk"
TRAIN_LOG_FILE = "train_log.jsonl"
PRIOR_LOG_FILE = "prior_log.jsonl"
CONFIG_ECHO_FILE = "config.yaml"
COPY_SYNTH_FILE = "copy_synth.qfvs"
REPORT_FILE = "report.txt"

# Binary formats
CORPUS_MAGIC = b"QFVC"
CORPUS_VERSION = 1
CHECKPOINT_MAGIC = b"QFVK"
CHECKPOINT_VERSION = 1
SAMPLES_MAGIC = b"QFVS"
SAMPLES_VERSION = 1

# Metric records
METRICS_FORMAT = "qfvae-metrics"
METRICS_VERSION = 1

# Leading hex characters of the configuration digest shown in reports
CONFIG_DIGEST_LENGTH = 12

# Stage tags
STAGE1 = "stage1"
PRIOR_CONTINUOUS = "prior-cont"
PRIOR_DISCRETE = "prior-disc"

# Prior kinds
PRIOR_INDEPENDENT = "independent"
PRIOR_AR_CONTINUOUS = "ar-continuous"
PRIOR_AR_DISCRETE = "ar-discrete"

PRIOR_STAGE_TAGS = {
    PRIOR_AR_CONTINUOUS: PRIOR_CONTINUOUS,
    PRIOR_AR_DISCRETE: PRIOR_DISCRETE,
}

# Numerics
LOG_SIGMA_MIN = -10.0
LOG_SIGMA_MAX = 10.0
GRAD_CHECK_FLOOR = 1e-8
MASK_NEGATIVE = -1e9
MFCC_LOG_FLOOR = 1e-10
PROB_TOLERANCE = 1e-9

# Corpus synthesis
HARMONIC_COUNT = 5
AMPLITUDE_SCALE = 0.15
TIMBRE_SEED = 0x51F0_7EB2
TIMBRE_MIN = 0.1
TIMBRE_MAX = 0.8

# Metrics
MEL_BANDS = 26
MFCC_COEFFICIENTS = 13
FFE_PITCH_TOLERANCE = 0.2

# Free-running decoding ends once this much attention mass has left the last token
DECODE_EXIT_MASS = 0.5
