from __future__ import annotations

from contextlib import contextmanager
from typing import Iterator

from sqlalchemy import create_engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

Base = declarative_base()

_factories: dict[str, sessionmaker] = {}


def session_factory(database_url: str) -> sessionmaker:
    """One engine and session factory per URL; tables are created on first use."""
    if database_url not in _factories:
        engine = create_engine(database_url, future=True)
        Base.metadata.create_all(bind=engine)
        _factories[database_url] = sessionmaker(
            bind=engine, autoflush=False, autocommit=False, future=True
        )
    return _factories[database_url]


@contextmanager
def get_session(database_url: str) -> Iterator[Session]:
    session: Session = session_factory(database_url)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
