"""Class-index to label-name tables shipped as data, never computed.

The 17-class table matches the label strings used in sweep manifests for
the simulated kitchen-object benchmark; built-in and file-loaded models
with 17 outputs map logits index i to NVD_CLASS_NAMES[i].
"""

NVD_CLASS_NAMES = (
    "banana",
    "baseball",
    "cowboy hat, ten-gallon hat",
    "cup",
    "dumbbell",
    "frying pan, frypan, skillet",
    "hammer",
    "ice cream, icecream",
    "laptop, laptop computer",
    "microwave, microwave oven",
    "mouse, computer mouse",
    "orange",
    "pillow",
    "plate",
    "screwdriver",
    "spatula",
    "vase",
)
