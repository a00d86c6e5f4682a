"""正态-指数族 (NEF) 混合分布与混合泊松随机和数值库"""

__version__ = "0.1.0"
