from .features import (
    FEATURE_DIM,
    Family,
    FeatureSeries,
    TrainingExample,
    build_feature_series,
    centroid_columns,
    denormalize,
    example_at,
    feature_dim,
    lead_frames,
    make_windows,
    ms_to_frames,
    normalize,
    stack_examples,
    window_indices,
)
from .gapfill import fill_ball_gaps, find_gaps
from .records import (
    COCO_JOINTS,
    CSV_COLUMNS,
    N_JOINTS,
    FrameRecord,
    Recording,
    format_from_path,
    parse_frame_records,
    write_frame_records,
)
from .synth import SynthParams, synth_rally
