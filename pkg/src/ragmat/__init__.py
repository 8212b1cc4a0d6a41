"""Retrieval-augmented generation of patient education materials for low back
pain, plus the evaluation apparatus around it: readability metrics, a blinded
Likert review service, and inferential statistics."""

__version__ = "0.1.0"
