# LangGraph nodes for one benchmark replication
