"""pondstat: out-of-core subsampling engine for interactive analysis of massive CSVs."""

from ._kernels import IMPL as KERNEL_IMPL
from .source import (INTERCEPT, Codebook, DatasetError, DatasetHandle, Schema,
                     count_rows_exact, estimate_row_count, open_dataset, update_schema)
from .pump import (Frame, SamplingPlan, build_line_index, draw_random_access,
                   draw_sequential, parse_frame, replicate_seed)
from .shuffle import ShuffleReport, shuffle_file
from .transform import (TransformProgram, apply_program, eval_expr, expand_dummies,
                        parse_expr, parse_program, print_expr)

__version__ = "0.1.0"
