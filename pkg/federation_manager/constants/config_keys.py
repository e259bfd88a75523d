# Keys carried inside FitIns / EvaluateIns config maps
KEY_LOCAL_EPOCHS = "local_epochs"
KEY_LEARNING_RATE = "learning_rate"
KEY_BATCH_SIZE = "batch_size"
KEY_SEED = "seed"
KEY_CUTOFF_SECONDS = "cutoff_seconds"

# Keys carried inside FitRes / EvaluateRes metrics
KEY_FAILED = "failed"
KEY_COMPLETED_EPOCHS = "completed_epochs"
KEY_TRAIN_LOSS = "train_loss"
KEY_VIRTUAL_TIME_S = "virtual_time_s"
KEY_ENERGY_J = "energy_J"
KEY_ACCURACY = "accuracy"

# Keys advertised in Hello capabilities
KEY_PROCESSOR_CLASS = "processor_class"
KEY_SECONDS_PER_SAMPLE = "seconds_per_sample"
KEY_POWER_WATTS = "power_watts"

FIT_REQUIRED_KEYS = [KEY_LOCAL_EPOCHS, KEY_LEARNING_RATE, KEY_BATCH_SIZE, KEY_SEED]

# Experiment config choices
STRATEGY_TYPES = ("fedavg", "deadline")
PARTITION_SCHEMES = ("iid", "label_skew")
RUN_MODES = ("in_process", "tcp")
EVALUATION_KINDS = ("federated", "centralized")
INITIAL_PARAMETER_SOURCES = ("seeded", "client")
SWEEP_FACTORS = ("local_epochs", "clients_per_round", "tau")

# Experiment config defaults
DEFAULT_ROUNDS = 10
DEFAULT_LOCAL_EPOCHS = 1
DEFAULT_LEARNING_RATE = 0.05
DEFAULT_BATCH_SIZE = 32
DEFAULT_N_SAMPLES = 5000
DEFAULT_N_FEATURES = 32
DEFAULT_N_CLASSES = 10
DEFAULT_CLASS_SEPARATION = 3.0
DEFAULT_DATA_SEED = 0
DEFAULT_MODEL_SEED = 0
DEFAULT_SAMPLING_SEED = 0
DEFAULT_CLIENT_COUNT = 10
DEFAULT_PROCESSOR_CLASS = "gpu"
DEFAULT_SECONDS_PER_SAMPLE = 0.01
DEFAULT_POWER_WATTS = 10.0
DEFAULT_LABEL_SKEW_ALPHA = 0.5

# Training / evaluation split inside each shard
TRAIN_FRACTION = 0.8

# Global model init range for W (biases start at zero)
INIT_WEIGHT_SCALE = 0.05

# Wall-clock guard on fit/evaluate: multiple of expected virtual time, with a floor
ROUND_TIMEOUT_FACTOR = 10.0
ROUND_TIMEOUT_FLOOR_S = 30.0

DEFAULT_BIND = "0.0.0.0:8080"
