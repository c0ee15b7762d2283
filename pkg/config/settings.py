"""
Globale Konfigurationseinstellungen für den Air-Writing Translater
"""
import os

# Logging-Einstellungen
LOG_FILE = os.environ.get("AIRWRITING_LOG_FILE", "logs/airwriting.log")
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

# Domänen
INERTIA = "inertia"
TRAJECTORY = "trajectory"
DOMAINS = (INERTIA, TRAJECTORY)

CHANNELS = {
    INERTIA: 6,      # ax, ay, az, gx, gy, gz
    TRAJECTORY: 3,   # x, y, z
}
CHANNEL_NAMES = {
    INERTIA: ("ax", "ay", "az", "gx", "gy", "gz"),
    TRAJECTORY: ("x", "y", "z"),
}
RATES_HZ = {
    INERTIA: 60.0,
    TRAJECTORY: 200.0,
}

# Architektur
LATENT_DIM = 64
LEAKY_SLOPE = 0.2
DISC_HIDDEN = 128
DISC_OUTPUTS = 64

# (out_channels, kernel, stride, pad); in_channels ergibt sich aus der Domäne
ENCODER_LAYERS = (
    (32, 7, 2, 3),
    (64, 5, 2, 2),
    (64, 3, 2, 1),
)
# Spiegel des Encoders; das letzte Layer liefert die Kanäle der Domäne
DECODER_LAYERS = (
    (64, 4, 2, 1),
    (32, 4, 2, 1),
    (None, 4, 2, 1),
)
SMOOTHING_KERNEL = 5
UPSAMPLING_FACTOR = 8

# Optimierung
LEARNING_RATE = 1e-3
BATCH_SIZE = 64
DISC_UPDATES_PER_ITER = 3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DEFAULT_EPOCHS = 100

# Daten
MOVING_AVERAGE_WINDOW = 5
MIN_SEQUENCE_LENGTH = 16
TRAIN_FRACTION = 0.8
DURATION_POLICIES = ("rate-scaled", "source-length")
DEFAULT_DURATION_POLICY = "rate-scaled"

# Evaluation
MMD_RESAMPLE_LENGTH = 64
PROBE_LAYERS = (
    (32, 5, 2, 2),
    (64, 5, 2, 2),
    (64, 5, 2, 2),
)
PROBE_EPOCHS = 15
PROBE_BATCH_SIZE = 32
PROBE_LEARNING_RATE = 1e-3
PROBE_FOLDS = 5

# CLI Exit-Codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
