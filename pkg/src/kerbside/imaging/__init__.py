"""Image preprocessing, the texture-feature baseline classifier, and the
external-prediction bridge."""

from .image import Image, InvalidTarget, NotPortrait, crop_to_square, resize_bilinear, to_grayscale
from .io import MissingImage, load_image, save_image, image_content_type
from .features import DESCRIPTOR_ID, FeatureVector, WrongSize, extract_features, preprocess
from .classify import (
    EmptyTrainingSet,
    KnnClassifier,
    MixedDescriptors,
    Prediction,
    PredictionSet,
    DuplicatePrediction,
    UnknownFrameId,
    import_predictions,
    predict_frames,
    train_knn,
)

__all__ = [
    "Image",
    "InvalidTarget",
    "NotPortrait",
    "crop_to_square",
    "resize_bilinear",
    "to_grayscale",
    "MissingImage",
    "load_image",
    "save_image",
    "image_content_type",
    "DESCRIPTOR_ID",
    "FeatureVector",
    "WrongSize",
    "extract_features",
    "preprocess",
    "EmptyTrainingSet",
    "KnnClassifier",
    "MixedDescriptors",
    "Prediction",
    "PredictionSet",
    "DuplicatePrediction",
    "UnknownFrameId",
    "import_predictions",
    "predict_frames",
    "train_knn",
]
