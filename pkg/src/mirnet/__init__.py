"""Speaker identity embeddings extracted directly from two-speaker mixtures.

The package splits into a small autodiff core (`numerics`), signal frontend
(`frontend`), the model itself (`encoder`, `attention`, `embedder`, `model`),
permutation-invariant training (`pit`, `trainer`), a mixture verification
protocol (`evalproto`), and run infrastructure (`corpus`, `config`,
`checkpoint`, `service`, `cli`).
"""

__version__ = "0.1.0"
