# Matrix/edge-list files, data ingestion and benchmark reports
