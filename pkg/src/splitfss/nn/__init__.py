from .specs import LayerSpec, NetworkSpec, TrainConfig, network1, network2
