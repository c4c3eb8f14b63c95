from .layers import (DropoutContext, MemoryCellParams, MemoryCellState, MemoryLayer, ShapeMismatch,
                     UnknownMode, channel_dropout, memory_cell_step, memory_layer_step)
from .net import (BASELINE_KINDS, DecisionNet, NetConfig, NetState, UnknownKind, baseline_config,
                  build_baseline, desk_config, forward, full_scale_config, tiny_config)
from .tensor import IndivisibleChannels, Tensor, group_norm, no_grad
from .train import (AdamW, DemoDataset, DemoRecord, EmptyDataset, EmptyMode, TrainConfig,
                    balance_dataset, tbptt_train)
from .io import (dump_pooled_features, load_checkpoint, load_dataset, save_checkpoint,
                 save_dataset)
