"""Date-filtered news scraping and sentiment scoring pipeline."""

__version__ = "0.1.0"
