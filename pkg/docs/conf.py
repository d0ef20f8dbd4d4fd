"""qpcalc documentation build configuration file.

Only the markdown builder is used (see `invoke make_docs`); the output is served by jekyll.
"""

from __future__ import annotations

from qpcalc import __version__

project = "qpcalc"
copyright = "2026, qpcalc developers"  # noqa: A001

# Napoleon is necessary to parse Google style docstrings. Markdown builder allows the generation of markdown output.
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx_markdown_builder",
]
exclude_patterns = ["_build", "../**/tests*"]
autoclass_content = "both"

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

# The short X.Y version and the full version, including alpha/beta/rc tags.
version = __version__
release = __version__

# If true, the current module name will be prepended to all description unit titles.
add_module_names = False

pygments_style = "sphinx"
htmlhelp_basename = "qpcalcdoc"
