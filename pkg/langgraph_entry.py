# langgraph_entry.py
from tensorcert.graph import CertificationGraph

graph = CertificationGraph().compile()
