import time
import uuid


def generate_run_id(command: str) -> str:
    """
    Identificador de corrida: subcomando, marca de tiempo en ms y sufijo aleatorio.
    Sólo va al manifiesto.
    """
    ts = int(time.time() * 1000)
    return f"{command}-{ts}-{uuid.uuid4().hex[:6]}"

