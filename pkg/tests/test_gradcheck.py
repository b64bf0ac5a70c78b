import numpy as np
import pytest

from prelex import tensor as T
from prelex.gradcheck import grad_check


def test_quadratic_exact_under_central_differences():
    x = T.Tensor(np.array([3.0]), requires_grad=True)
    report = grad_check(lambda x: T.sumsq(x), [x], epsilon=1e-5, tolerance=1e-4)
    assert report.passed
    entry = report.entries[0]
    assert entry.analytic == pytest.approx(6.0, abs=1e-12)
    assert entry.numeric == pytest.approx(6.0, abs=1e-6)


def test_sigmoid_derivative_at_zero():
    x = T.Tensor(np.array([0.0]), requires_grad=True)
    report = grad_check(lambda x: T.tsum(T.sigmoid(x)), [x])
    assert report.passed
    assert report.entries[0].analytic == pytest.approx(0.25, abs=1e-12)


def test_epsilon_bounds_enforced():
    x = T.Tensor(np.array([1.0]), requires_grad=True)
    with pytest.raises(ValueError):
        grad_check(lambda x: T.sumsq(x), [x], epsilon=1e-2)
    with pytest.raises(ValueError):
        grad_check(lambda x: T.sumsq(x), [x], epsilon=1e-8)


def test_scalar_output_required():
    x = T.Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with pytest.raises(ValueError):
        grad_check(lambda x: T.tanh(x), [x])


def test_non_finite_forward_is_reported_not_raised():
    x = T.Tensor(np.array([1.0]), requires_grad=True)

    def exploding(x):
        out = T.sumsq(x)
        out.data = np.float64(np.nan)
        return out

    report = grad_check(exploding, [x])
    assert not report.passed
    assert "non-finite" in report.note


def test_wrong_gradient_is_caught():
    x = T.Tensor(np.array([1.5, -0.5]), requires_grad=True)

    def broken(x):
        out = T.sumsq(x)
        orig = out._backward

        def bad():
            orig()
            x.grad *= 1.01
        out._backward = bad
        return out

    report = grad_check(broken, [x])
    assert not report.passed


def test_report_worst_entry():
    x = T.Tensor(np.array([2.0, -1.0]), requires_grad=True)
    report = grad_check(lambda x: T.sumsq(x), [x])
    worst = report.worst()
    assert worst is not None
    assert worst.rel_error == report.max_rel_error
    assert "PASS" in str(report)
