"""Models package - the DGCNN embedding network and its heads"""

from models.dgcnn import (
    Conv1dSpec,
    Network,
    NetworkConfig,
    build,
    choose_sortpool_k,
    classify,
    embed,
    load_network,
    reset_head,
    save_network,
)
