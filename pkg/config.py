import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Base configuration class."""

    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL') or 'INFO'
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

    # Output locations
    OUTPUT_DIR = os.environ.get('KSPACE_LAB_OUTPUT_DIR') or 'runs'

    # Numeric precision of network layers (32 or 64 bit)
    PRECISION = int(os.environ.get('KSPACE_LAB_PRECISION', 32))

    # Synthetic acquisition
    IMAGE_SIZE = int(os.environ.get('KSPACE_LAB_IMAGE_SIZE', 64))
    NUM_COILS = int(os.environ.get('KSPACE_LAB_NUM_COILS', 8))
    ACCELERATION = int(os.environ.get('KSPACE_LAB_ACCELERATION', 4))
    NUM_ACS = int(os.environ.get('KSPACE_LAB_NUM_ACS', 16))

    # GRAPPA kernel geometry
    GRAPPA_SOURCE_LINES = int(os.environ.get('KSPACE_LAB_GRAPPA_SOURCE_LINES', 4))
    GRAPPA_KX = int(os.environ.get('KSPACE_LAB_GRAPPA_KX', 5))

    # Network
    NET_DEPTH = 2
    NET_BASE_CHANNELS = 16
    POLU_ORDER = 1.0
    DENSE_SKIPS = True

    # Training protocol
    EPOCHS = int(os.environ.get('KSPACE_LAB_EPOCHS', 200))
    BATCH_SIZE = 3
    LEARNING_RATE = 0.02
    MOMENTUM = 0.5
    LR_HALVE_EVERY = 20
    CHECKPOINT_EVERY = 20
    ALPHA = 0.01
    ALPHA_SWEEP = (0.05, 0.01, 0.005)
    AUGMENT = True
    SEED = int(os.environ.get('KSPACE_LAB_SEED', 0))


class DeskConfig(Config):
    """Desk-scale configuration (64x64 phantoms)."""
    EPOCHS = int(os.environ.get('KSPACE_LAB_EPOCHS', 20))


class PaperConfig(Config):
    """Full-scale configuration matching the published protocol."""
    IMAGE_SIZE = 320
    NET_DEPTH = 4
    NET_BASE_CHANNELS = 64
    EPOCHS = 200


class TestingConfig(Config):
    """Testing configuration."""
    LOG_LEVEL = 'WARNING'
    PRECISION = 64
    IMAGE_SIZE = 16
    NUM_ACS = 4
    NET_DEPTH = 1
    NET_BASE_CHANNELS = 4
    EPOCHS = 2
    AUGMENT = False


# Configuration dictionary
config = {
    'desk': DeskConfig,
    'paper': PaperConfig,
    'testing': TestingConfig,
    'default': DeskConfig
}
