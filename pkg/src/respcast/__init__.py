"""Community response forecasting engine.

Forecasts how social-media communities will respond to a real or
hypothetical post by retrieving historical responses, grouping them into
semantically and ideologically coherent communities, grounding in external
news/knowledge-graph context, and generating responses per community.
"""

__version__ = "0.1.0"
