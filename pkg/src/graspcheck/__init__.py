"""Vision-based grasp verification toolkit.

Building blocks: a dataset format for gripper annotations, a procedural scene
synthesizer, detector post-processing (adaptive thresholds, box clustering),
the two-stage verify pipeline, the evaluation harness, and a VQA baseline.
Neural models stay behind the DetectorBackend / ClassifierBackend / VqaClient
protocols so every pipeline decision is testable without trained weights.
"""

from .dataset import (
    Annotation,
    BoundingBox,
    Category,
    Dataset,
    Example,
    GraspLabel,
    Split,
    category_counts,
    distinct_objects,
    load_dataset,
    save_dataset,
)
from .detect import (
    ClusterConfig,
    Detection,
    DetectorBackend,
    FixtureDetectorBackend,
    PadConfig,
    ThresholdSchedule,
    adaptive_detect,
    cluster_detections,
    pad_box,
    select_detection,
)
from .errors import GraspCheckError, GripperNotFound
from .geometry import ConvexHullMesh, RigidTransform, convex_hulls_intersect
from .gripper import (
    GripperGeometry,
    close_gripper_on_object,
    default_gripper,
    place_object_in_gripper,
    project_gripper_bbox,
)
from .metrics import (
    EvalRecord,
    PRScore,
    classification_table,
    derive_pr_from_accuracies,
    detection_correct_synthetic,
    detection_table,
    latency_stats,
    precision_recall,
)
from .pipeline import (
    ClassifierBackend,
    DecisionConfig,
    FixtureClassifierBackend,
    Frame,
    GraspVerdict,
    PipelineConfig,
    TrainingPlan,
    crop_with_margin,
    decide,
    validate_training_plan,
    verify_grasp,
)
from .synth import ArmPose, Batch, GenConfig, SceneSpec, generate_batch, perturb_arm_pose, place_distractors
from .vqa import ReplayVqaClient, VqaClient, VqaPrompt, build_prompt, parse_answer, run_vqa_eval

__version__ = "0.1.0"
