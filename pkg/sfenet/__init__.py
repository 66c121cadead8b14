from sfenet.pooling import STREAMS, FeatureBundle, FeatureConfig, extract_bundle
from sfenet.sfenet import SFENet, TrainConfig
