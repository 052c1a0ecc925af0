# La raíz del repositorio queda en sys.path para que `import src` funcione en los tests.
