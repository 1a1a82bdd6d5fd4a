"""Tools package - FileReader, FileWriter, Logger, errors"""

from tools.errors import (
    CheckpointFormatError,
    ConfigError,
    ContractViolation,
    DatasetFormatError,
    DatasetLoadError,
    DegenerateGraphError,
    KernelPretrainError,
    PairSamplingError,
    TrainingDivergedError,
)
from tools.file_reader import read_file, read_int_column, read_int_rows, file_exists
from tools.file_writer import write_file, write_bytes
from tools.logger import (
    log_tool_call,
    log_stage,
    log_metric,
    start_trace,
    generate_id,
    read_history,
)
