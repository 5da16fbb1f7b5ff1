# ges-graph: graphical Exponential Screening for Gaussian precision matrices
