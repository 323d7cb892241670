"""Topic discovery for malicious email corpora.

Emails are parsed and sanitized, embedded, reduced, grouped with density
clustering, described by class-based TF-IDF keywords and short semantic
labels, scored for coherence and diversity, and arranged into a category
hierarchy.
"""

__version__ = "0.1.0"
