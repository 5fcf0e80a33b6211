"""
Adaptive-k 样本选择 - 含噪声标签的小批量训练中，按自适应阈值挑选参与更新的样本
"""

__version__ = "0.1.0"
