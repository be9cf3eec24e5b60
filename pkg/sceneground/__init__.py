"""
Zero-shot 3D visual grounding pipeline.
Grounds natural-language queries in posed RGB-D sequences with a vision-language model.
"""
__version__ = "0.1.0"
