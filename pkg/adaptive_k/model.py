"""
分类模型模块 - 单隐层前馈网络，softmax 交叉熵，手写反向传播与朴素 SGD
"""

import numpy as np
from scipy.special import log_softmax, softmax

PARAM_NAMES = ("W1", "b1", "W2", "b2")


class MlpModel:
    """n_features -> hidden (tanh) -> n_classes 的分类器"""

    def __init__(self, n_features, n_classes, hidden=64, seed=0):
        self.n_features = n_features
        self.n_classes = n_classes
        self.hidden = hidden

        # Glorot 均匀初始化
        rng = np.random.default_rng(seed)
        limit1 = np.sqrt(6.0 / (n_features + hidden))
        limit2 = np.sqrt(6.0 / (hidden + n_classes))
        self.params = {
            "W1": rng.uniform(-limit1, limit1, size=(n_features, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.uniform(-limit2, limit2, size=(hidden, n_classes)),
            "b2": np.zeros(n_classes),
        }

    def forward(self, X):
        """返回 (logits, 隐层激活)"""
        p = self.params
        h = np.tanh(X @ p["W1"] + p["b1"])
        return h @ p["W2"] + p["b2"], h

    def per_sample_losses(self, X, y):
        """逐样本交叉熵损失"""
        logits, _ = self.forward(X)
        return -log_softmax(logits, axis=1)[np.arange(len(y)), y]

    def loss_and_gradients(self, X, y, mask=None):
        """
        在被选样本上计算平均交叉熵损失及梯度

        参数:
            X, y: mini-batch 特征与（观测）标签
            mask: 布尔选择掩码，None 表示全部样本

        返回:
            (loss, grads)；没有样本被选中时返回 (None, None)
        """
        if mask is not None:
            X, y = X[mask], y[mask]
        m = X.shape[0]
        if m == 0:
            return None, None

        p = self.params
        logits, h = self.forward(X)
        loss = float(-log_softmax(logits, axis=1)[np.arange(m), y].mean())

        dlogits = softmax(logits, axis=1)
        dlogits[np.arange(m), y] -= 1.0
        dlogits /= m

        dh = dlogits @ p["W2"].T
        dz1 = dh * (1.0 - h * h)
        grads = {
            "W1": X.T @ dz1,
            "b1": dz1.sum(axis=0),
            "W2": h.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        return loss, grads

    def apply_gradients(self, grads, learning_rate):
        for name in PARAM_NAMES:
            self.params[name] -= learning_rate * grads[name]

    def sgd_step(self, X, y, learning_rate, mask=None):
        """一次 SGD 更新；无样本被选中时跳过并返回 None"""
        loss, grads = self.loss_and_gradients(X, y, mask)
        if grads is not None:
            self.apply_gradients(grads, learning_rate)
        return loss

    def predict(self, X):
        logits, _ = self.forward(X)
        return np.argmax(logits, axis=1)

    def accuracy(self, X, y):
        return float(np.mean(self.predict(X) == y))

    def parameter_vector(self):
        return np.concatenate([self.params[name].ravel() for name in PARAM_NAMES])

    def load_parameter_vector(self, vector):
        offset = 0
        for name in PARAM_NAMES:
            size = self.params[name].size
            self.params[name] = vector[offset:offset + size].reshape(self.params[name].shape).copy()
            offset += size
