"""Late fusion of multimodal classifier scores with calibration and
clinical evaluation (ROC, reliability, decision curves)."""

__version__ = "0.1.0"
