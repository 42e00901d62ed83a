from dotenv import load_dotenv
from pydantic_settings import BaseSettings

load_dotenv()


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"
    show_progress: bool = True
    
    # Engine dimensions
    dim: int = 32
    det_feature_dim: int = 32
    det_edge_dim: int = 2
    det_projection_seed: int = 7
    
    # Attention
    attention_temperature: float = 1.0
    symbolic_temperature: float = 100.0
    
    # Training schedule (Adam 0.001, dropped to 0.0001 after the first epoch)
    learning_rate: float = 0.001
    decayed_learning_rate: float = 0.0001
    batch_size: int = 128
    epochs_gt: int = 5
    epochs_det: int = 10
    seed: int = 0
    
    # Data generation
    train_split: float = 0.9
    max_rejections: int = 1000
    max_chain_depth: int = 4
    
    # Evaluation
    eval_workers: int = 1
    
    # Checkpoints
    checkpoint_version: int = 1
    
    def epochs_for(self, setting: str) -> int:
        return self.epochs_det if setting == "det" else self.epochs_gt
    
    class Config:
        env_file = ".env"
        env_prefix = "XNM_"

settings = Settings()
