#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Kftrack documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.coverage',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'Kftrack'
author = 'Kftrack contributors'
version = '0.1.0'
release = '0.1.0'

language = 'en'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

# numpy, scipy and pandas are not needed to render signatures
autodoc_mock_imports = ['numpy', 'scipy', 'pandas', 'yaml']

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'Kftrackdoc'

latex_documents = [
    (master_doc, 'Kftrack.tex', 'Kftrack Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'kftrack', 'Kftrack Documentation', [author], 1)
]
