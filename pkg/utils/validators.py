"""
Validators - Range and consistency checks for scenario values
"""

from typing import Dict, Tuple

# key -> (low, high, low_inclusive, high_inclusive)
NUMERIC_RANGES = {
    'alpha': (0.0, 1.0, False, True),
    'gamma': (0.0, 1.0, True, False),
    'lambda': (0.0, float('inf'), True, True),
    'rho': (0.0, float('inf'), True, True),
    'sigma': (0.0, float('inf'), True, True),
    'kp': (0.0, float('inf'), False, True),
    'ki': (0.0, float('inf'), True, True),
    'r_s': (0.0, float('inf'), False, True),
    'r_is': (0.0, float('inf'), False, True),
    'r_c': (0.0, float('inf'), False, True),
    'v_max': (0.0, float('inf'), False, True),
    'w_max': (0.0, float('inf'), False, True),
    'resolution': (0.0, float('inf'), False, True),
    'epsilon': (0.0, 1.0, True, True),
    'drop_prob': (0.0, 1.0, True, False),
    'kappa': (0.0, float('inf'), True, True),
    'robots': (1, 255, True, True),
    'ray_count': (8, float('inf'), True, True),
    'min_cluster': (1, float('inf'), True, True),
    't_max': (1, float('inf'), True, True),
    'trials': (1, float('inf'), True, True),
    'snapshot_every': (0, float('inf'), True, True),
    'confidence': (0.0, 1.0, False, False),
    'ssim_window': (2, float('inf'), True, True),
}


class ScenarioValidator:
    """Validate scenario values against their documented ranges"""

    @staticmethod
    def validate_value(key: str, value) -> Tuple[bool, str]:
        """
        Check one numeric value

        Args:
            key: Scenario key
            value: Parsed value

        Returns:
            (is_valid, error_message)
        """
        if key not in NUMERIC_RANGES:
            return True, "Valid"

        low, high, low_inc, high_inc = NUMERIC_RANGES[key]
        ok_low = value >= low if low_inc else value > low
        ok_high = value <= high if high_inc else value < high
        if ok_low and ok_high:
            return True, "Valid"

        left = '[' if low_inc else '('
        right = ']' if high_inc else ')'
        return False, f"'{key}' = {value} outside {left}{low}, {high}{right}"

    @staticmethod
    def validate(values: Dict) -> Tuple[bool, str]:
        """
        Validate every known key of a parsed scenario

        Args:
            values: Dict of key -> parsed value

        Returns:
            (is_valid, error_message)
        """
        for key, value in values.items():
            ok, message = ScenarioValidator.validate_value(key, value)
            if not ok:
                return False, message
        return True, "Valid"


class GridValidator:
    """Validate generator inputs"""

    @staticmethod
    def validate(width: int, height: int, density: float) -> Tuple[bool, str]:
        """
        Validate map generator arguments

        Returns:
            (is_valid, error_message)
        """
        if width < 3 or height < 3:
            return False, f"Map must be at least 3x3, got {width}x{height}"
        if not 0.0 <= density <= 0.4:
            return False, f"Obstacle density {density} outside [0, 0.4]"
        return True, "Valid"
