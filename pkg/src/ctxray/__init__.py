"""ctxray: synthetic frontal chest X-rays with instance lesion
annotations computed from annotated CT volumes, plus dataset assembly,
seeded augmentation and IoU evaluation."""

from .augmentation import AugmentationParams, apply_augmentation, sample_params
from .dataset import (
    CocoAnnotation,
    DatasetManifest,
    ManifestEntry,
    assemble_dataset,
    export_coco,
    import_coco,
    instance_to_annotation,
    polygon_to_annotation,
    rasterize_polygon,
    read_manifest_csv,
    union_mask,
    write_manifest_csv,
)
from .evaluation import IoUReport, evaluate_dataset, image_iou, iou, t_margin, t_quantile
from .labeling import (
    ComponentMap,
    LabelingConfig,
    LesionInstance,
    build_annotations,
    connected_components,
    extract_polygon,
    select_instances,
)
from .pipeline import PipelineConfig, synthesize, synthesize_case
from .projection import (
    Image8,
    Projection2D,
    WindowSpec,
    normalize_to_8bit,
    project_coronal,
    project_mask,
    resample_isotropic,
)
from .volume_io import MaskVolume, Volume3D, pair_mask, read_nifti

__version__ = "0.1.0"
