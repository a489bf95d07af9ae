import os
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

# Raiz do repositório (scripts/utils/ -> raiz)
PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent


def _resolve(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else PROJECT_ROOT / p


class SettingsManager:
    def __init__(
        self,
        settings_path: Optional[str] = None,
        profiles_path: Optional[str] = None,
    ):
        settings_path = settings_path or os.environ.get(
            "ASIAN_SETTINGS_PATH", "config/settings.yaml"
        )
        profiles_path = profiles_path or os.environ.get(
            "ASIAN_PROFILES_PATH", "config/model_profiles.json"
        )
        self.settings_path = _resolve(settings_path)
        self.profiles_path = _resolve(profiles_path)
        self.base_settings = self._load_yaml(self.settings_path)
        self.profiles = self._load_json(self.profiles_path)

    def _load_yaml(self, path: Path) -> Dict[str, Any]:
        if not path.exists():
            logger.warning(f"Arquivo de configuração não encontrado: {path}")
            return {}
        with open(path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f) or {}

    def _load_json(self, path: Path) -> Dict[str, Any]:
        if not path.exists():
            logger.warning(f"Arquivo de perfis não encontrado: {path}")
            return {}
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def get_settings(self, profile_name: Optional[str] = None) -> Dict[str, Any]:
        """Combina as configurações base com o bloco model/market de um perfil."""
        settings = dict(self.base_settings)

        if profile_name and profile_name in self.profiles:
            profile = self.profiles[profile_name]
            settings["model_profile"] = profile
            # O bloco de mercado do perfil vira o mercado padrão
            if "market" in profile:
                settings["market"] = {**settings.get("market", {}), **profile["market"]}

        return settings

    def list_model_profiles(self) -> List[str]:
        return sorted(self.profiles)

    def get_model_profile(self, name: str) -> Optional[Dict[str, Any]]:
        return self.profiles.get(name)

    def section(self, *keys: str) -> Dict[str, Any]:
        node: Any = self.base_settings
        for key in keys:
            if not isinstance(node, dict):
                return {}
            node = node.get(key, {})
        return node if isinstance(node, dict) else {}

    def root_config(self):
        from scripts.asian.numerics import RootConfig

        return RootConfig.from_settings(self.section("numerics", "root"))

    def quad_config(self):
        from scripts.asian.numerics import QuadConfig

        return QuadConfig.from_settings(self.section("numerics", "quad"))

    def bvp_steps(self) -> int:
        return int(self.section("numerics", "bvp").get("steps", 400))

    def bvp_scan_points(self) -> int:
        return int(self.section("numerics", "bvp").get("scan_points", 41))

    def vol_bounds(self) -> Dict[str, float]:
        volatility = self.section("volatility")
        return {
            "sigma_lo": float(volatility.get("sigma_lo", 1e-4)),
            "sigma_hi": float(volatility.get("sigma_hi", 10.0)),
        }

    def default_market(self, profile_name: Optional[str] = None) -> Dict[str, float]:
        """Mercado padrão (seção market), sobrescrito pelo perfil quando houver."""
        market = self.get_settings(profile_name).get("market", {})
        return {"s0": 100.0, "r": 0.0, "q": 0.0, **market}

    def models_dir(self) -> Path:
        return _resolve(self.section("paths").get("models", "config/models"))

    def bands(self) -> Dict[str, float]:
        moneyness = self.section("moneyness")
        return {
            "atm_band": float(moneyness.get("atm_band", 1e-6)),
            "series_band": float(moneyness.get("series_band", 1e-4)),
        }

    def mc_config(self, **overrides: Any):
        from scripts.asian.mc_engine import McConfig

        values = dict(self.section("mc_config"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return McConfig.from_settings(values)

    def resolve_path(self, path: str) -> Path:
        return _resolve(path)


# Singleton instance
settings_manager = SettingsManager()
