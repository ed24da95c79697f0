"""
ringwatch：Chord 类结构化覆盖网络的安全查找模拟与匿名性分析
"""

__version__ = "0.1.0"
