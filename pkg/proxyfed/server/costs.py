"""
Per-round communication and tuning cost accounting.
"""


def comm_cost(num_parameters: int, num_classes: int, clients_per_round: int) -> int:
    """
    Values exchanged in one round: M uploads of (P + C) plus one (P + C) broadcast.

    Each upload is the client's model plus its C prior counts; the broadcast is
    the global model plus the C-entry prior.

    Raises:
        ValueError: If any argument is not positive.
    """
    if num_parameters < 1 or num_classes < 1 or clients_per_round < 1:
        raise ValueError(
            f"comm_cost needs positive arguments, got P={num_parameters}, "
            f"C={num_classes}, M={clients_per_round}"
        )
    per_message = num_parameters + num_classes
    return clients_per_round * per_message + per_message


def gpt_flops_estimate(
    epochs: int, clients_per_round: int, num_classes: int, feature_dim: int
) -> int:
    """Relative operation count Q * M * C^2 * d of global proxy tuning."""
    for name, value in (
        ("epochs", epochs),
        ("clients_per_round", clients_per_round),
        ("num_classes", num_classes),
        ("feature_dim", feature_dim),
    ):
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}")
    return epochs * clients_per_round * num_classes**2 * feature_dim
